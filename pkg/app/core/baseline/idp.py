import logging
import threading
from typing import Dict, List, Optional

from cryptography.hazmat.primitives.constant_time import bytes_eq

from app.config.settings import settings
from app.core.baseline.layout import (
    ASSERTION_REQUEST_SIZE,
    CREDENTIAL_SIZE,
    CREDENTIALS_CIPHERTEXT,
    CREDENTIALS_PLAINTEXT,
    CREDENTIALS_SIZE,
)
from app.core.crypto import (
    NONCE_SIZE,
    CurvePoint,
    Scalar,
    ecdsa_sign,
    ecdsa_verify,
    ecies_decrypt,
    ecies_encrypt,
    gen_nonce,
)
from app.core.exceptions import AuthenticationError, ProtocolAbort
from app.core.flat.assertion import issue_assertion, serialize_assertion
from app.core.flat.layout import K_CS_SIZE
from app.core.pki import ExplicitCertificate
from app.core.roles import BaseRole
from app.core.wire import ENTITY_ID_SIZE, BaselineMessageType, Message, entity_bytes, parse_entity
from app.models.records import IdpSession, SessionPhase
from app.models.schemas import AbortReason, RoleName
from app.repositories.registry import ClientRegistry
from app.repositories.session import IdpSessionRepository
from app.utils.clock import Clock
from app.utils.rng import RandomSource

logger = logging.getLogger(__name__)


class BaselineIdentityProvider(BaseRole):
    """Baseline IdP: challenge-response login with an encrypted credential.

    Registered clients' certificates and credentials come from the client
    registry; SP certificates come from federation metadata. Same locking
    contract as the FLAT IdP.
    """

    role_name = RoleName.IDP
    namespace = BaselineMessageType

    def __init__(
        self,
        entity_id: int,
        sk: Scalar,
        certificate: ExplicitCertificate,
        clients: ClientRegistry,
        sp_certificates: Dict[int, ExplicitCertificate],
        clock: Clock,
        rng: RandomSource,
        sessions: Optional[IdpSessionRepository] = None,
        assertion_lifetime_s: Optional[int] = None,
    ):
        super().__init__(entity_id, clock, rng)
        self.sk = sk
        self.certificate = certificate
        self.clients = clients
        self.sp_keys: Dict[int, CurvePoint] = {
            sp_id: cert.public_key() for sp_id, cert in sp_certificates.items()
        }
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
        record = self.clients.get_by_id(m.src)
        if record is None or record.certificate is None:
            self.record_abort(AbortReason.UNKNOWN_SENDER, m, f"client {m.src:06x} not registered")
            return []
        if m.msg_type == BaselineMessageType.ASSERTION_REQUEST:
            return self._on_assertion_request(m, now)
        if m.msg_type == BaselineMessageType.CREDENTIALS:
            return self._on_credentials(m, now)
        self.record_abort(AbortReason.UNEXPECTED, m, "type not accepted by the IdP")
        return []

    def _abort_session(self, session: IdpSession, reason: AbortReason, m: Message, detail: str):
        self.sessions.update(session, abort_reason=reason)
        self.sessions.set_phase(session, SessionPhase.ABORTED, self.clock.now_ms())
        self.record_abort(reason, m, f"session={session.id} {detail}")
        return []

    # ASSERTION_REQUEST -> CHALLENGE
    def _on_assertion_request(self, m: Message, now: int) -> List[Message]:
        if len(m.payload) != ASSERTION_REQUEST_SIZE or m.seq != 0:
            self.record_abort(AbortReason.FORMAT, m, "malformed assertion request")
            return []
        sp_id = parse_entity(m.payload[:ENTITY_ID_SIZE])
        n_sp = m.payload[ENTITY_ID_SIZE : ENTITY_ID_SIZE + NONCE_SIZE]
        n_c2 = m.payload[ENTITY_ID_SIZE + NONCE_SIZE :]
        if sp_id not in self.sp_keys:
            self.record_abort(AbortReason.UNKNOWN_SENDER, m, f"SP {sp_id:06x} not in metadata")
            return []

        session = self.sessions.open_session(
            m.src, sp_id, n_c2, SessionPhase.AWAIT_CREDENTIALS, now
        )
        session.seqs.accept(m.src, m.seq)
        n_idp = gen_nonce(self.rng)
        self.sessions.update(session, n_idp=n_idp, n_sp=n_sp)
        signature = ecdsa_sign(self.sk, n_idp + n_c2 + entity_bytes(m.src), self.rng)
        payload = self.certificate.to_bytes() + n_idp + signature.to_bytes()
        seq = session.seqs.next_tx(m.src)
        return [self.message(BaselineMessageType.CHALLENGE, m.src, seq, payload)]

    # CREDENTIALS -> SP_KEY and ASSERTION
    def _on_credentials(self, m: Message, now: int) -> List[Message]:
        candidates = self.sessions.find(client_id=m.src, phase=SessionPhase.AWAIT_CREDENTIALS)
        if not candidates:
            self.record_abort(AbortReason.UNEXPECTED, m, "no session awaiting credentials")
            return []
        session = candidates[0]
        if len(m.payload) != CREDENTIALS_SIZE:
            return self._abort_session(session, AbortReason.FORMAT, m, "malformed credentials")
        try:
            session.seqs.accept(m.src, m.seq)
        except ProtocolAbort as exc:
            return self._abort_session(session, exc.reason, m, exc.detail)

        record = self.clients.get_by_id(m.src)
        ciphertext = m.payload[:CREDENTIALS_CIPHERTEXT]
        q_c = record.certificate.public_key()
        signature = m.payload[CREDENTIALS_CIPHERTEXT:]
        if not ecdsa_verify(q_c, ciphertext + session.n_idp, signature):
            return self._abort_session(
                session, AbortReason.SIGNATURE, m, "client signature rejected"
            )
        try:
            pt = ecies_decrypt(self.sk, ciphertext)
        except AuthenticationError as exc:
            return self._abort_session(session, AbortReason.DECRYPT, m, str(exc))
        if len(pt) != CREDENTIALS_PLAINTEXT or not bytes_eq(pt[CREDENTIAL_SIZE:], session.n_idp):
            return self._abort_session(session, AbortReason.NONCE, m, "credential nonce mismatch")
        if not bytes_eq(pt[:CREDENTIAL_SIZE], record.credential):
            return self._abort_session(session, AbortReason.DENIED, m, "credential rejected")

        k_cs = self.rng.token_bytes(K_CS_SIZE)
        q_sp = self.sp_keys[session.sp_id]
        sp_ciphertext = ecies_encrypt(q_sp, k_cs + entity_bytes(m.src), self.rng).to_bytes()
        sp_signature = ecdsa_sign(self.sk, sp_ciphertext + session.n_sp, self.rng)
        sp_key = self.message(
            BaselineMessageType.SP_KEY,
            session.sp_id,
            session.seqs.next_tx(session.sp_id),
            sp_ciphertext + sp_signature.to_bytes(),
        )

        expiry = int(self.clock.now()) + self.assertion_lifetime_s
        assertion = issue_assertion(self.sk, m.src, session.sp_id, session.n_sp, expiry, self.rng)
        client_ciphertext = ecies_encrypt(q_c, k_cs + session.n_c, self.rng).to_bytes()
        assertion_message = self.message(
            BaselineMessageType.ASSERTION,
            m.src,
            session.seqs.next_tx(m.src),
            serialize_assertion(assertion) + client_ciphertext,
        )
        self.sessions.update(session, k_cs=k_cs)
        self.sessions.set_phase(session, SessionPhase.DONE, now)
        logger.info(
            "assertion issued session=%d client=%06x sp=%06x", session.id, m.src, session.sp_id
        )
        return [sp_key, assertion_message]
