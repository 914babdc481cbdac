"""
FLAT IdP: authenticates clients by their pre-shared K_CI, authenticates SPs
through ECQV certificates, and distributes K_CS to both (key distribution
center role).

Locking contract: `on_message` may be called from any number of delivery
contexts; every call runs under one re-entrant lock, so sessions are updated
one event at a time.
"""

import logging
import threading
from typing import Callable, List, Optional

from app.config.settings import settings
from app.core.crypto import (
    NONCE_SIZE,
    SIGNATURE_SIZE,
    CurvePoint,
    Scalar,
    SymmetricKey,
    direction_label,
    ecdsa_sign,
    ecdsa_verify,
    ecies_encrypt,
    gen_nonce,
    sym_protect,
    sym_unprotect,
)
from app.core.exceptions import AuthenticationError, CertificateError, CryptoError, ProtocolAbort
from app.core.flat.assertion import issue_assertion, serialize_assertion
from app.core.flat.layout import (
    ASSERTION_REQUEST_PLAINTEXT,
    CERT_RESPONSE_SIZE,
    K_CS_SIZE,
    KEY_ACK_SIZE,
    KEY_REQUEST_PLAINTEXT,
)
from app.core.pki import IMPLICIT_CERT_SIZE, EntityRole, ImplicitCertificate, ecqv_extract
from app.core.roles import BaseRole
from app.core.wire import ENTITY_ID_SIZE, Message, MessageType, entity_bytes, parse_entity
from app.models.records import IdpSession, SessionPhase
from app.models.schemas import AbortReason, RoleName
from app.repositories.registry import ClientRegistry
from app.repositories.session import IdpSessionRepository
from app.utils.clock import Clock
from app.utils.rng import RandomSource

logger = logging.getLogger(__name__)


class FlatIdentityProvider(BaseRole):
    role_name = RoleName.IDP

    def __init__(
        self,
        entity_id: int,
        sk: Scalar,
        certificate: ImplicitCertificate,
        q_ca: CurvePoint,
        clients: ClientRegistry,
        clock: Clock,
        rng: RandomSource,
        sessions: Optional[IdpSessionRepository] = None,
        assertion_lifetime_s: Optional[int] = None,
    ):
        super().__init__(entity_id, clock, rng)
        self.sk = sk
        self.certificate = certificate
        self.q_ca = q_ca
        self.clients = clients
        self.sessions = sessions if sessions is not None else IdpSessionRepository()
        self.assertion_lifetime_s = assertion_lifetime_s or settings.assertion_lifetime_s
        self._lock = threading.RLock()

    @property
    def is_terminal(self) -> bool:
        return False

    def on_message(self, m: Message) -> List[Message]:
        with self._lock:
            return super().on_message(m)

    def handle(self, m: Message) -> List[Message]:
        now = self.clock.now_ms()
        self.sessions.gc(now)
        handlers = {
            MessageType.KEY_REQUEST: self._on_key_request,
            MessageType.CERTIFICATE_RESPONSE: self._on_cert_response,
            MessageType.KEY_ACKNOWLEDGMENT: self._on_key_ack,
            MessageType.ASSERTION_REQUEST: self._on_assertion_request,
        }
        handler = handlers.get(m.msg_type)
        if handler is None:
            self.record_abort(AbortReason.UNEXPECTED, m, "type not accepted by the IdP")
            return []
        return handler(m, now)

    # -------------------------------------------------------------------------
    # Helpers
    # -------------------------------------------------------------------------

    def _abort_session(
        self, session: IdpSession, reason: AbortReason, m: Message, detail: str
    ) -> None:
        self.sessions.update(session, abort_reason=reason)
        self.sessions.set_phase(session, SessionPhase.ABORTED, self.clock.now_ms())
        self.record_abort(reason, m, f"session={session.id} {detail}")

    def _client_key(self, m: Message) -> Optional[SymmetricKey]:
        k_ci = self.clients.get_key(m.src)
        if k_ci is None:
            self.record_abort(AbortReason.UNKNOWN_SENDER, m, f"client {m.src:06x} not registered")
        return k_ci

    def _match_sp_session(
        self,
        m: Message,
        phase: SessionPhase,
        matches: Callable[[IdpSession], bool],
    ) -> Optional[IdpSession]:
        """Session for this SP in `phase` whose signature check passes.

        When none passes, every candidate is aborted: an SP that cannot sign
        for its certificate gets neither K_CS nor an assertion for its client.
        """
        candidates = self.sessions.find(sp_id=m.src, phase=phase)
        if not candidates:
            self.record_abort(AbortReason.UNEXPECTED, m, f"no session awaiting {m.msg_type.name}")
            return None
        for session in candidates:
            if matches(session):
                return session
        for session in candidates:
            self._abort_session(session, AbortReason.SIGNATURE, m, "SP signature rejected")
        return None

    def _accept_seq(self, session: IdpSession, m: Message) -> bool:
        try:
            session.seqs.accept(m.src, m.seq)
        except ProtocolAbort as exc:
            self._abort_session(session, exc.reason, m, exc.detail)
            return False
        return True

    def _send(
        self, session: IdpSession, msg_type: MessageType, dst: int, payload: bytes
    ) -> Message:
        return self.message(msg_type, dst, session.seqs.next_tx(dst), payload)

    def _protect(
        self, session: IdpSession, k_ci: SymmetricKey, msg_type: MessageType, pt: bytes
    ) -> Message:
        seq = session.seqs.next_tx(session.client_id)
        payload = sym_protect(
            k_ci, pt, seq, direction_label(self.entity_id, session.client_id), self.rng
        )
        return self.message(msg_type, session.client_id, seq, payload.to_bytes())

    # -------------------------------------------------------------------------
    # Steps
    # -------------------------------------------------------------------------

    # KEY_REQUEST -> CERTIFICATE_CHALLENGE
    def _on_key_request(self, m: Message, now: int) -> List[Message]:
        k_ci = self._client_key(m)
        if k_ci is None:
            return []
        try:
            pt = sym_unprotect(k_ci, m.payload, m.seq, direction_label(m.src, self.entity_id))
        except AuthenticationError as exc:
            self.record_abort(AbortReason.MAC, m, str(exc))
            return []
        if len(pt) != KEY_REQUEST_PLAINTEXT or m.seq != 0:
            self.record_abort(AbortReason.FORMAT, m, "malformed key request")
            return []

        sp_id = parse_entity(pt[:ENTITY_ID_SIZE])
        n_c = pt[ENTITY_ID_SIZE:]
        session = self.sessions.open_session(
            m.src, sp_id, n_c, SessionPhase.AWAIT_CERT_RESPONSE, now
        )
        session.seqs.accept(m.src, m.seq)
        n_idp = gen_nonce(self.rng)
        self.sessions.update(session, n_idp=n_idp)
        logger.info(
            "session opened id=%d client=%06x sp=%06x", session.id, session.client_id, sp_id
        )
        payload = self.certificate.to_bytes() + n_idp
        return [self._send(session, MessageType.CERTIFICATE_CHALLENGE, sp_id, payload)]

    # CERTIFICATE_RESPONSE -> SP_KEY
    def _on_cert_response(self, m: Message, now: int) -> List[Message]:
        if len(m.payload) != CERT_RESPONSE_SIZE:
            waiting = self.sessions.find(sp_id=m.src, phase=SessionPhase.AWAIT_CERT_RESPONSE)
            for session in waiting:
                self._abort_session(
                    session, AbortReason.FORMAT, m, "malformed certificate-response"
                )
            return []
        cert_bytes = m.payload[:IMPLICIT_CERT_SIZE]
        n_sp = m.payload[IMPLICIT_CERT_SIZE : IMPLICIT_CERT_SIZE + NONCE_SIZE]
        signature = m.payload[-SIGNATURE_SIZE:]

        try:
            cert = ImplicitCertificate.from_bytes(cert_bytes)
            if cert.identity.entity_id != m.src or cert.identity.role != EntityRole.SP:
                raise CertificateError("certificate subject does not match the sender")
            q_sp = ecqv_extract(self.q_ca, cert)
        except (CertificateError, CryptoError) as exc:
            for session in self.sessions.find(sp_id=m.src, phase=SessionPhase.AWAIT_CERT_RESPONSE):
                self._abort_session(session, AbortReason.CERTIFICATE, m, str(exc))
            return []

        session = self._match_sp_session(
            m,
            SessionPhase.AWAIT_CERT_RESPONSE,
            lambda s: ecdsa_verify(q_sp, s.n_idp + n_sp + cert_bytes, signature),
        )
        if session is None or not self._accept_seq(session, m):
            return []

        k_cs = self.rng.token_bytes(K_CS_SIZE)
        plaintext = k_cs + entity_bytes(session.client_id)
        ciphertext = ecies_encrypt(q_sp, plaintext, self.rng).to_bytes()
        sp_signature = ecdsa_sign(self.sk, ciphertext + n_sp, self.rng)
        self.sessions.update(session, n_sp=n_sp, q_sp=q_sp, k_cs=k_cs)
        self.sessions.set_phase(session, SessionPhase.AWAIT_KEY_ACK, now)
        payload = ciphertext + sp_signature.to_bytes()
        return [self._send(session, MessageType.SP_KEY, m.src, payload)]

    # KEY_ACKNOWLEDGMENT -> CLIENT_KEY
    def _on_key_ack(self, m: Message, now: int) -> List[Message]:
        if len(m.payload) != KEY_ACK_SIZE:
            self.record_abort(AbortReason.FORMAT, m, "malformed key acknowledgment")
            return []
        ack, signature = m.payload[:NONCE_SIZE], m.payload[NONCE_SIZE:]
        session = self._match_sp_session(
            m,
            SessionPhase.AWAIT_KEY_ACK,
            lambda s: ecdsa_verify(s.q_sp, ack + s.n_idp, signature),
        )
        if session is None or not self._accept_seq(session, m):
            return []

        k_ci = self.clients.get_key(session.client_id)
        self.sessions.set_phase(session, SessionPhase.AWAIT_ASSERTION_REQUEST, now)
        return [self._protect(session, k_ci, MessageType.CLIENT_KEY, session.k_cs + session.n_c)]

    # ASSERTION_REQUEST -> ASSERTION
    def _on_assertion_request(self, m: Message, now: int) -> List[Message]:
        k_ci = self._client_key(m)
        if k_ci is None:
            return []
        try:
            pt = sym_unprotect(k_ci, m.payload, m.seq, direction_label(m.src, self.entity_id))
        except AuthenticationError as exc:
            self.record_abort(AbortReason.MAC, m, str(exc))
            return []
        if len(pt) != ASSERTION_REQUEST_PLAINTEXT:
            self.record_abort(AbortReason.FORMAT, m, "malformed assertion request")
            return []

        n_c2 = pt[:NONCE_SIZE]
        sp_id = parse_entity(pt[NONCE_SIZE:])
        candidates = self.sessions.find(
            client_id=m.src, sp_id=sp_id, phase=SessionPhase.AWAIT_ASSERTION_REQUEST
        )
        if not candidates:
            self.record_abort(AbortReason.UNEXPECTED, m, "no session awaiting an assertion request")
            return []
        session = candidates[0]
        if not self._accept_seq(session, m):
            return []

        expiry = int(self.clock.now()) + self.assertion_lifetime_s
        assertion = issue_assertion(self.sk, m.src, sp_id, session.n_sp, expiry, self.rng)
        self.sessions.set_phase(session, SessionPhase.DONE, now)
        logger.info("assertion issued session=%d client=%06x sp=%06x", session.id, m.src, sp_id)
        plaintext = serialize_assertion(assertion) + n_c2
        return [self._protect(session, k_ci, MessageType.ASSERTION, plaintext)]
