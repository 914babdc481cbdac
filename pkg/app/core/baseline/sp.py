import hashlib
import logging
from enum import Enum
from typing import List, Optional, Set

from app.core.baseline.client import checked_certificate
from app.core.baseline.layout import (
    SERVICE_INIT_SIZE,
    SERVICE_REQUEST_PLAINTEXT,
    SERVICE_REQUEST_PROTECTED,
    SERVICE_REQUEST_SIZE,
)
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
from app.core.exceptions import AuthenticationError, ProtocolAbort
from app.core.flat.assertion import ASSERTION_SIZE, parse_assertion, verify_assertion
from app.core.flat.client import expect_length
from app.core.flat.layout import (
    K_CS_SIZE,
    SP_KEY_CIPHERTEXT,
    SP_KEY_PLAINTEXT,
    SP_KEY_SIZE,
    STATUS_DENIED,
    STATUS_GRANTED,
)
from app.core.pki import EXPLICIT_CERT_SIZE, EntityRole, ExplicitCertificate
from app.core.roles import BaseRole
from app.core.wire import BaselineMessageType, Message, entity_bytes, parse_entity
from app.models.schemas import AbortReason, RoleName
from app.utils.clock import Clock
from app.utils.rng import RandomSource

logger = logging.getLogger(__name__)


class BaselineSpState(str, Enum):
    IDLE = "idle"
    AWAIT_KEY = "await_key"
    KEY_HELD = "key_held"
    DONE = "done"
    ABORTED = "aborted"


class BaselineServiceProvider(BaseRole):
    """Baseline SP. A service-init with seq 0 opens a new session in any state."""

    role_name = RoleName.SP
    namespace = BaselineMessageType

    def __init__(
        self,
        entity_id: int,
        idp_id: int,
        sk: Scalar,
        certificate: ExplicitCertificate,
        idp_certificate: ExplicitCertificate,
        q_ca: CurvePoint,
        clock: Clock,
        rng: RandomSource,
    ):
        super().__init__(entity_id, clock, rng)
        self.idp_id = idp_id
        self.sk = sk
        self.certificate = certificate
        self.q_idp = idp_certificate.public_key()
        self.q_ca = q_ca
        self.state = BaselineSpState.IDLE
        self.consumed: Set[bytes] = set()
        self.granted = 0
        self.denied = 0
        self._reset_session()

    def _reset_session(self) -> None:
        self.seqs.reset()
        self.client_id: Optional[int] = None
        self.k_cs: Optional[SymmetricKey] = None
        self._q_c: Optional[CurvePoint] = None
        self._n_c1 = b""
        self.n_sp = b""

    @property
    def is_terminal(self) -> bool:
        return self.state in (BaselineSpState.DONE, BaselineSpState.ABORTED)

    def on_abort(self, reason: AbortReason, m: Optional[Message], detail: str) -> None:
        self.state = BaselineSpState.ABORTED
        self.record_abort(reason, m, detail)

    def handle(self, m: Message) -> List[Message]:
        if m.msg_type == BaselineMessageType.SERVICE_INIT and m.seq == 0:
            self._reset_session()
            self.seqs.accept(m.src, m.seq)
            return self._on_service_init(m)

        if (
            self.state == BaselineSpState.DONE
            and m.msg_type == BaselineMessageType.SERVICE_REQUEST
            and m.src == self.client_id
        ):
            return self._on_service_request(m)

        expected = {
            BaselineSpState.AWAIT_KEY: (BaselineMessageType.SP_KEY, self.idp_id),
            BaselineSpState.KEY_HELD: (BaselineMessageType.SERVICE_REQUEST, self.client_id),
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
        if self.state == BaselineSpState.AWAIT_KEY:
            return self._on_sp_key(m)
        return self._on_service_request(m)

    # SERVICE_INIT -> REDIRECT
    def _on_service_init(self, m: Message) -> List[Message]:
        expect_length(m.payload, SERVICE_INIT_SIZE, "service init")
        cert = checked_certificate(
            self.q_ca,
            m.payload[:EXPLICIT_CERT_SIZE],
            m.src,
            EntityRole.CLIENT,
            int(self.clock.now()),
        )
        self.client_id = m.src
        self._q_c = cert.public_key()
        self._n_c1 = m.payload[EXPLICIT_CERT_SIZE:]
        self.n_sp = gen_nonce(self.rng)
        self.state = BaselineSpState.AWAIT_KEY
        payload = self.certificate.to_bytes() + entity_bytes(self.idp_id) + self.n_sp
        seq = self.seqs.next_tx(m.src)
        return [self.message(BaselineMessageType.REDIRECT, m.src, seq, payload)]

    # IdP session-key delivery
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
        if parse_entity(pt[K_CS_SIZE:]) != self.client_id:
            raise ProtocolAbort(AbortReason.NONCE, "session key issued for another client")
        self.k_cs = SymmetricKey.from_bytes(pt[:K_CS_SIZE])
        self.state = BaselineSpState.KEY_HELD
        return []

    def _on_service_request(self, m: Message) -> List[Message]:
        expect_length(m.payload, SERVICE_REQUEST_SIZE, "service request")
        protected = m.payload[:SERVICE_REQUEST_PROTECTED]
        if not ecdsa_verify(self._q_c, protected, m.payload[SERVICE_REQUEST_PROTECTED:]):
            raise ProtocolAbort(AbortReason.SIGNATURE, "client signature rejected")
        try:
            pt = sym_unprotect(self.k_cs, protected, m.seq, direction_label(m.src, self.entity_id))
        except AuthenticationError as exc:
            raise ProtocolAbort(AbortReason.MAC, str(exc)) from None

        reason = self._check_assertion(pt)
        status = STATUS_DENIED if reason is not None else STATUS_GRANTED
        seq = self.seqs.next_tx(m.src)
        reply = sym_protect(
            self.k_cs,
            bytes([status]) + self._n_c1,
            seq,
            direction_label(self.entity_id, m.src),
            self.rng,
        ).to_bytes()
        signature = ecdsa_sign(self.sk, reply, self.rng)
        payload = reply + signature.to_bytes()
        response = self.message(BaselineMessageType.SERVICE, m.src, seq, payload)

        if reason is not None:
            self.denied += 1
            raise ProtocolAbort(reason, "service denied", outbound=[response])

        self.consumed.add(hashlib.sha256(pt[:ASSERTION_SIZE]).digest())
        self.granted += 1
        self.state = BaselineSpState.DONE
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
            or pt[ASSERTION_SIZE : ASSERTION_SIZE + NONCE_SIZE] != self.n_sp
            or assertion.sp_id != self.entity_id
            or assertion.client_id != self.client_id
        ):
            return AbortReason.NONCE
        if assertion.is_expired(int(self.clock.now())):
            return AbortReason.EXPIRED
        return None
