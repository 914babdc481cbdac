import hashlib
import logging
from enum import Enum
from typing import List, Optional, Set

from app.core.crypto import (
    NONCE_SIZE,
    CurvePoint,
    Scalar,
    SymmetricKey,
    direction_label,
    ecdsa_sign,
    ecdsa_verify,
    ecies_decrypt,
    gen_nonce,
    sym_protect,
    sym_unprotect,
)
from app.core.exceptions import AuthenticationError, CertificateError, ProtocolAbort
from app.core.flat.assertion import ASSERTION_SIZE, parse_assertion, verify_assertion
from app.core.flat.client import expect_length
from app.core.flat.layout import (
    CERT_CHALLENGE_SIZE,
    K_CS_SIZE,
    SERVICE_REQUEST_PLAINTEXT,
    SP_KEY_CIPHERTEXT,
    SP_KEY_PLAINTEXT,
    SP_KEY_SIZE,
    STATUS_DENIED,
    STATUS_GRANTED,
)
from app.core.pki import IMPLICIT_CERT_SIZE, EntityRole, ImplicitCertificate, ecqv_extract
from app.core.roles import BaseRole
from app.core.wire import Message, MessageType, parse_entity
from app.models.schemas import AbortReason, RoleName
from app.utils.clock import Clock
from app.utils.rng import RandomSource

logger = logging.getLogger(__name__)


class SpState(str, Enum):
    IDLE = "idle"
    AWAIT_KEY = "await_key"
    KEY_HELD = "key_held"
    DONE = "done"
    ABORTED = "aborted"


class FlatServiceProvider(BaseRole):
    """FLAT SP: proves its identity to the IdP, receives K_CS, serves assertion holders.

    A certificate-challenge from the configured IdP with seq 0 starts a fresh
    session in any state. Consumed assertions are remembered across sessions.
    """

    role_name = RoleName.SP

    def __init__(
        self,
        entity_id: int,
        idp_id: int,
        sk: Scalar,
        certificate: ImplicitCertificate,
        q_ca: CurvePoint,
        clock: Clock,
        rng: RandomSource,
    ):
        super().__init__(entity_id, clock, rng)
        self.idp_id = idp_id
        self.sk = sk
        self.certificate = certificate
        self.q_ca = q_ca
        self.state = SpState.IDLE
        self.consumed: Set[bytes] = set()
        self.granted = 0
        self.denied = 0
        self._reset_session()

    def _reset_session(self) -> None:
        self.seqs.reset()
        self.q_idp: Optional[CurvePoint] = None
        self.k_cs: Optional[SymmetricKey] = None
        self.client_id: Optional[int] = None
        self.n_idp = b""
        self.n_sp = b""

    @property
    def is_terminal(self) -> bool:
        return self.state in (SpState.DONE, SpState.ABORTED)

    def on_abort(self, reason: AbortReason, m: Optional[Message], detail: str) -> None:
        self.state = SpState.ABORTED
        self.record_abort(reason, m, detail)

    def handle(self, m: Message) -> List[Message]:
        if m.msg_type == MessageType.CERTIFICATE_CHALLENGE and m.src == self.idp_id and m.seq == 0:
            self._reset_session()
            self.seqs.accept(m.src, m.seq)
            return self._on_challenge(m)

        if (
            self.state == SpState.DONE
            and m.msg_type == MessageType.SERVICE_REQUEST
            and m.src == self.client_id
        ):
            return self._on_service_request(m)

        expected = {
            SpState.AWAIT_KEY: (MessageType.SP_KEY, self.idp_id),
            SpState.KEY_HELD: (MessageType.SERVICE_REQUEST, self.client_id),
        }.get(self.state)
        if expected is None:
            logger.info(
                "drop role=sp entity=%06x state=%s type=%s",
                self.entity_id, self.state.value, m.msg_type.name,
            )
            return []
        if (m.msg_type, m.src) != expected:
            raise ProtocolAbort(
                AbortReason.UNEXPECTED, f"{m.msg_type.name} from {m.src:06x} in {self.state.value}"
            )
        self.seqs.accept(m.src, m.seq)
        if self.state == SpState.AWAIT_KEY:
            return self._on_sp_key(m)
        return self._on_service_request(m)

    def _on_challenge(self, m: Message) -> List[Message]:
        expect_length(m.payload, CERT_CHALLENGE_SIZE, "certificate-challenge")
        cert_bytes = m.payload[:IMPLICIT_CERT_SIZE]
        self.n_idp = m.payload[IMPLICIT_CERT_SIZE:]
        try:
            cert = ImplicitCertificate.from_bytes(cert_bytes)
        except CertificateError as exc:
            raise ProtocolAbort(AbortReason.CERTIFICATE, str(exc)) from None
        identity = cert.identity
        if identity.entity_id != m.src or identity.role != EntityRole.IDP:
            raise ProtocolAbort(AbortReason.CERTIFICATE, "certificate subject is not the IdP")
        if not identity.valid_at(int(self.clock.now())):
            raise ProtocolAbort(AbortReason.CERTIFICATE, "IdP certificate outside validity window")
        self.q_idp = ecqv_extract(self.q_ca, cert)

        self.n_sp = gen_nonce(self.rng)
        own_cert = self.certificate.to_bytes()
        signature = ecdsa_sign(self.sk, self.n_idp + self.n_sp + own_cert, self.rng)
        self.state = SpState.AWAIT_KEY
        seq = self.seqs.next_tx(self.idp_id)
        payload = own_cert + self.n_sp + signature.to_bytes()
        return [self.message(MessageType.CERTIFICATE_RESPONSE, self.idp_id, seq, payload)]

    # SP_KEY -> KEY_ACKNOWLEDGMENT
    def _on_sp_key(self, m: Message) -> List[Message]:
        expect_length(m.payload, SP_KEY_SIZE, "SP key")
        ciphertext = m.payload[:SP_KEY_CIPHERTEXT]
        if not ecdsa_verify(self.q_idp, ciphertext + self.n_sp, m.payload[SP_KEY_CIPHERTEXT:]):
            raise ProtocolAbort(AbortReason.SIGNATURE, "IdP signature over SP key rejected")
        try:
            pt = ecies_decrypt(self.sk, ciphertext)
        except AuthenticationError as exc:
            raise ProtocolAbort(AbortReason.DECRYPT, str(exc)) from None
        expect_length(pt, SP_KEY_PLAINTEXT, "SP key")
        self.k_cs = SymmetricKey.from_bytes(pt[:K_CS_SIZE])
        self.client_id = parse_entity(pt[K_CS_SIZE:])

        ack = gen_nonce(self.rng)
        signature = ecdsa_sign(self.sk, ack + self.n_idp, self.rng)
        self.state = SpState.KEY_HELD
        seq = self.seqs.next_tx(self.idp_id)
        payload = ack + signature.to_bytes()
        return [self.message(MessageType.KEY_ACKNOWLEDGMENT, self.idp_id, seq, payload)]

    def _on_service_request(self, m: Message) -> List[Message]:
        try:
            pt = sym_unprotect(
                self.k_cs, m.payload, m.seq, direction_label(m.src, self.entity_id)
            )
        except AuthenticationError as exc:
            # no reply: the sender could not be authenticated
            raise ProtocolAbort(AbortReason.MAC, str(exc)) from None

        n_c3 = pt[ASSERTION_SIZE:] if len(pt) == SERVICE_REQUEST_PLAINTEXT else bytes(NONCE_SIZE)
        reason = self._check_assertion(pt)
        seq = self.seqs.next_tx(m.src)
        status = STATUS_DENIED if reason is not None else STATUS_GRANTED
        reply = sym_protect(
            self.k_cs, bytes([status]) + n_c3, seq, direction_label(self.entity_id, m.src), self.rng
        )
        response = self.message(MessageType.SERVICE, m.src, seq, reply.to_bytes())

        if reason is not None:
            self.denied += 1
            raise ProtocolAbort(reason, "service denied", outbound=[response])

        self.consumed.add(hashlib.sha256(pt[:ASSERTION_SIZE]).digest())
        self.granted += 1
        self.state = SpState.DONE
        logger.info("granted role=sp entity=%06x client=%06x", self.entity_id, m.src)
        return [response]

    def _check_assertion(self, pt: bytes) -> Optional[AbortReason]:
        if len(pt) != SERVICE_REQUEST_PLAINTEXT:
            return AbortReason.FORMAT
        raw = pt[:ASSERTION_SIZE]
        assertion = parse_assertion(raw)
        if not verify_assertion(self.q_idp, assertion):
            return AbortReason.SIGNATURE
        if hashlib.sha256(raw).digest() in self.consumed:
            return AbortReason.REPLAY
        if (
            assertion.n_sp != self.n_sp
            or assertion.sp_id != self.entity_id
            or assertion.client_id != self.client_id
        ):
            return AbortReason.NONCE
        if assertion.is_expired(int(self.clock.now())):
            return AbortReason.EXPIRED
        return None
