"""
Baseline client: verifies every certificate and signature it is shown and
performs its own public-key operations. An honest run costs exactly one ECIES
encryption, one ECIES decryption, two signatures and five verifications.
"""

import logging
from enum import Enum
from typing import List, Optional, Tuple

from app.core.baseline.layout import (
    ASSERTION_MESSAGE_SIZE,
    CHALLENGE_SIZE,
    REDIRECT_SIZE,
    SERVICE_PLAINTEXT,
    SERVICE_PROTECTED,
    SERVICE_SIZE,
    SESSION_KEY_PLAINTEXT,
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
    ecies_encrypt,
    gen_nonce,
    sym_protect,
    sym_unprotect,
)
from app.core.exceptions import AuthenticationError, ProtocolAbort
from app.core.flat.assertion import ASSERTION_SIZE, parse_assertion, verify_assertion
from app.core.flat.client import expect_echo, expect_length
from app.core.flat.layout import K_CS_SIZE, STATUS_GRANTED
from app.core.pki import (
    EXPLICIT_CERT_SIZE,
    EntityRole,
    ExplicitCertificate,
    explicit_verify,
)
from app.core.roles import ClientRole
from app.core.wire import (
    ENTITY_ID_SIZE,
    BaselineMessageType,
    Message,
    entity_bytes,
    parse_entity,
)
from app.models.schemas import AbortReason
from app.utils.clock import Clock
from app.utils.rng import RandomSource

logger = logging.getLogger(__name__)


class BaselineClientState(str, Enum):
    IDLE = "idle"
    AWAIT_REDIRECT = "await_redirect"
    AWAIT_CHALLENGE = "await_challenge"
    AWAIT_ASSERTION = "await_assertion"
    AWAIT_SERVICE = "await_service"
    DONE = "done"
    ABORTED = "aborted"


def checked_certificate(
    q_ca: CurvePoint, raw: bytes, subject: int, role: EntityRole, now: int
) -> ExplicitCertificate:
    """Parse and verify an explicit certificate presented by `subject`."""
    if not explicit_verify(q_ca, raw, now):
        raise ProtocolAbort(AbortReason.CERTIFICATE, f"certificate of {subject:06x} rejected")
    cert = ExplicitCertificate.from_bytes(raw)
    if cert.identity.entity_id != subject or cert.identity.role != role:
        raise ProtocolAbort(AbortReason.CERTIFICATE, "certificate subject does not match sender")
    return cert


class BaselineClient(ClientRole):
    namespace = BaselineMessageType
    idle_state = BaselineClientState.IDLE
    done_state = BaselineClientState.DONE
    aborted_state = BaselineClientState.ABORTED

    def __init__(
        self,
        entity_id: int,
        idp_id: int,
        sk: Scalar,
        certificate: ExplicitCertificate,
        credential: bytes,
        q_ca: CurvePoint,
        clock: Clock,
        rng: RandomSource,
        await_timeout_ms: Optional[int] = None,
        max_restarts: Optional[int] = None,
    ):
        super().__init__(entity_id, idp_id, clock, rng, await_timeout_ms, max_restarts)
        self.sk = sk
        self.certificate = certificate
        self.credential = credential
        self.q_ca = q_ca
        self.k_cs: Optional[SymmetricKey] = None
        self.status: Optional[int] = None
        self._q_sp: Optional[CurvePoint] = None
        self._q_idp: Optional[CurvePoint] = None
        self._n_c1 = b""
        self._n_c2 = b""
        self._n_sp = b""
        self._n_idp = b""

    def _now(self) -> int:
        return int(self.clock.now())

    def _send(self, msg_type: BaselineMessageType, dst: int, payload: bytes) -> Message:
        return self.message(msg_type, dst, self.seqs.next_tx(dst), payload)

    def begin(self) -> List[Message]:
        self.k_cs = None
        self.status = None
        self._n_c1 = gen_nonce(self.rng)
        init = self._send(
            BaselineMessageType.SERVICE_INIT, self.sp_id, self.certificate.to_bytes() + self._n_c1
        )
        self.transition(BaselineClientState.AWAIT_REDIRECT)
        return [init]

    def expectation(self) -> Tuple[BaselineMessageType, int]:
        return {
            BaselineClientState.AWAIT_REDIRECT: (BaselineMessageType.REDIRECT, self.sp_id),
            BaselineClientState.AWAIT_CHALLENGE: (BaselineMessageType.CHALLENGE, self.idp_id),
            BaselineClientState.AWAIT_ASSERTION: (BaselineMessageType.ASSERTION, self.idp_id),
            BaselineClientState.AWAIT_SERVICE: (BaselineMessageType.SERVICE, self.sp_id),
        }[self.state]

    def dispatch(self, m: Message) -> List[Message]:
        handler = {
            BaselineClientState.AWAIT_REDIRECT: self._on_redirect,
            BaselineClientState.AWAIT_CHALLENGE: self._on_challenge,
            BaselineClientState.AWAIT_ASSERTION: self._on_assertion,
            BaselineClientState.AWAIT_SERVICE: self._on_service,
        }[self.state]
        return handler(m)

    # REDIRECT -> ASSERTION_REQUEST
    def _on_redirect(self, m: Message) -> List[Message]:
        expect_length(m.payload, REDIRECT_SIZE, "redirect")
        cert = checked_certificate(
            self.q_ca, m.payload[:EXPLICIT_CERT_SIZE], m.src, EntityRole.SP, self._now()
        )
        self._q_sp = cert.public_key()
        idp_id = parse_entity(m.payload[EXPLICIT_CERT_SIZE : EXPLICIT_CERT_SIZE + ENTITY_ID_SIZE])
        if idp_id != self.idp_id:
            raise ProtocolAbort(AbortReason.UNEXPECTED, f"redirect to foreign IdP {idp_id:06x}")
        self._n_sp = m.payload[EXPLICIT_CERT_SIZE + ENTITY_ID_SIZE :]
        self._n_c2 = gen_nonce(self.rng)
        request = self._send(
            BaselineMessageType.ASSERTION_REQUEST,
            self.idp_id,
            entity_bytes(self.sp_id) + self._n_sp + self._n_c2,
        )
        self.transition(BaselineClientState.AWAIT_CHALLENGE)
        return [request]

    # CHALLENGE -> CREDENTIALS
    def _on_challenge(self, m: Message) -> List[Message]:
        expect_length(m.payload, CHALLENGE_SIZE, "challenge")
        cert = checked_certificate(
            self.q_ca, m.payload[:EXPLICIT_CERT_SIZE], m.src, EntityRole.IDP, self._now()
        )
        self._q_idp = cert.public_key()
        self._n_idp = m.payload[EXPLICIT_CERT_SIZE : EXPLICIT_CERT_SIZE + NONCE_SIZE]
        signed = self._n_idp + self._n_c2 + entity_bytes(self.entity_id)
        if not ecdsa_verify(self._q_idp, signed, m.payload[EXPLICIT_CERT_SIZE + NONCE_SIZE :]):
            raise ProtocolAbort(AbortReason.SIGNATURE, "IdP challenge signature rejected")

        ciphertext = ecies_encrypt(self._q_idp, self.credential + self._n_idp, self.rng).to_bytes()
        signature = ecdsa_sign(self.sk, ciphertext + self._n_idp, self.rng)
        credentials = self._send(
            BaselineMessageType.CREDENTIALS, self.idp_id, ciphertext + signature.to_bytes()
        )
        self.transition(BaselineClientState.AWAIT_ASSERTION)
        return [credentials]

    def _on_assertion(self, m: Message) -> List[Message]:
        expect_length(m.payload, ASSERTION_MESSAGE_SIZE, "assertion")
        raw = m.payload[:ASSERTION_SIZE]
        assertion = parse_assertion(raw)
        if not verify_assertion(self._q_idp, assertion):
            raise ProtocolAbort(AbortReason.SIGNATURE, "assertion signature rejected")
        if (
            assertion.client_id != self.entity_id
            or assertion.sp_id != self.sp_id
            or assertion.n_sp != self._n_sp
        ):
            raise ProtocolAbort(AbortReason.NONCE, "assertion bound to another session")
        try:
            pt = ecies_decrypt(self.sk, m.payload[ASSERTION_SIZE:])
        except AuthenticationError as exc:
            raise ProtocolAbort(AbortReason.DECRYPT, str(exc)) from None
        expect_length(pt, SESSION_KEY_PLAINTEXT, "session key")
        expect_echo(pt[K_CS_SIZE:], self._n_c2, "session key")
        self.k_cs = SymmetricKey.from_bytes(pt[:K_CS_SIZE])

        seq = self.seqs.next_tx(self.sp_id)
        protected = sym_protect(
            self.k_cs, raw + self._n_sp, seq, direction_label(self.entity_id, self.sp_id), self.rng
        ).to_bytes()
        signature = ecdsa_sign(self.sk, protected, self.rng)
        request = self.message(
            BaselineMessageType.SERVICE_REQUEST, self.sp_id, seq, protected + signature.to_bytes()
        )
        self.transition(BaselineClientState.AWAIT_SERVICE)
        return [request]

    def _on_service(self, m: Message) -> List[Message]:
        expect_length(m.payload, SERVICE_SIZE, "service")
        protected = m.payload[:SERVICE_PROTECTED]
        if not ecdsa_verify(self._q_sp, protected, m.payload[SERVICE_PROTECTED:]):
            raise ProtocolAbort(AbortReason.SIGNATURE, "SP service signature rejected")
        pt = sym_unprotect(self.k_cs, protected, m.seq, direction_label(m.src, self.entity_id))
        expect_length(pt, SERVICE_PLAINTEXT, "service")
        expect_echo(pt[1:], self._n_c1, "service")
        self.status = pt[0]
        if self.status != STATUS_GRANTED:
            raise ProtocolAbort(AbortReason.DENIED, f"status 0x{self.status:02x}")
        self.granted = True
        self.transition(BaselineClientState.DONE)
        logger.info("granted role=client entity=%06x sp=%06x", self.entity_id, self.sp_id)
        return []
