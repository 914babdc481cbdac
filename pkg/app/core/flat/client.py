"""
FLAT Client. Symmetric operations only: every message it sends or receives is
protected under K_CI (with the IdP) or K_CS (with the SP).
"""

import logging
from enum import Enum
from typing import List, Optional, Tuple

from cryptography.hazmat.primitives.constant_time import bytes_eq

from app.core.crypto import (
    NONCE_SIZE,
    SymmetricKey,
    direction_label,
    gen_nonce,
    sym_protect,
    sym_unprotect,
)
from app.core.exceptions import ProtocolAbort
from app.core.flat.assertion import ASSERTION_SIZE
from app.core.flat.layout import (
    ASSERTION_PLAINTEXT,
    CLIENT_KEY_PLAINTEXT,
    K_CS_SIZE,
    SERVICE_PLAINTEXT,
    STATUS_GRANTED,
)
from app.core.roles import ClientRole
from app.core.wire import Message, MessageType, entity_bytes
from app.models.schemas import AbortReason
from app.utils.clock import Clock
from app.utils.rng import RandomSource

logger = logging.getLogger(__name__)


class ClientState(str, Enum):
    IDLE = "idle"
    AWAIT_KEY = "await_key"
    AWAIT_ASSERTION = "await_assertion"
    AWAIT_SERVICE = "await_service"
    DONE = "done"
    ABORTED = "aborted"


def expect_length(pt: bytes, size: int, what: str) -> None:
    if len(pt) != size:
        raise ProtocolAbort(
            AbortReason.FORMAT, f"{what} plaintext is {len(pt)} bytes, expected {size}"
        )


def expect_echo(received: bytes, sent: bytes, what: str) -> None:
    if not bytes_eq(received, sent):
        raise ProtocolAbort(AbortReason.NONCE, f"{what} nonce echo mismatch")


class FlatClient(ClientRole):
    idle_state = ClientState.IDLE
    done_state = ClientState.DONE
    aborted_state = ClientState.ABORTED

    def __init__(
        self,
        entity_id: int,
        idp_id: int,
        k_ci: SymmetricKey,
        clock: Clock,
        rng: RandomSource,
        await_timeout_ms: Optional[int] = None,
        max_restarts: Optional[int] = None,
    ):
        super().__init__(entity_id, idp_id, clock, rng, await_timeout_ms, max_restarts)
        self.k_ci = k_ci
        self.k_cs: Optional[SymmetricKey] = None
        self.assertion: bytes = b""
        self.status: Optional[int] = None
        self._n_c = b""
        self._n_c2 = b""
        self._n_c3 = b""

    def _protect(self, key: SymmetricKey, dst: int, msg_type: MessageType, pt: bytes) -> Message:
        seq = self.seqs.next_tx(dst)
        payload = sym_protect(key, pt, seq, direction_label(self.entity_id, dst), self.rng)
        return self.message(msg_type, dst, seq, payload.to_bytes())

    def _unprotect(self, key: SymmetricKey, m: Message) -> bytes:
        return sym_unprotect(key, m.payload, m.seq, direction_label(m.src, self.entity_id))

    def begin(self) -> List[Message]:
        self.k_cs = None
        self.assertion = b""
        self.status = None
        self._n_c = gen_nonce(self.rng)
        request = self._protect(
            self.k_ci,
            self.idp_id,
            MessageType.KEY_REQUEST,
            entity_bytes(self.sp_id) + self._n_c,
        )
        self.transition(ClientState.AWAIT_KEY)
        return [request]

    def expectation(self) -> Tuple[MessageType, int]:
        return {
            ClientState.AWAIT_KEY: (MessageType.CLIENT_KEY, self.idp_id),
            ClientState.AWAIT_ASSERTION: (MessageType.ASSERTION, self.idp_id),
            ClientState.AWAIT_SERVICE: (MessageType.SERVICE, self.sp_id),
        }[self.state]

    def dispatch(self, m: Message) -> List[Message]:
        if self.state == ClientState.AWAIT_KEY:
            return self._on_client_key(m)
        if self.state == ClientState.AWAIT_ASSERTION:
            return self._on_assertion(m)
        return self._on_service(m)

    # CLIENT_KEY -> ASSERTION_REQUEST
    def _on_client_key(self, m: Message) -> List[Message]:
        pt = self._unprotect(self.k_ci, m)
        expect_length(pt, CLIENT_KEY_PLAINTEXT, "client key")
        expect_echo(pt[K_CS_SIZE:], self._n_c, "client key")
        self.k_cs = SymmetricKey.from_bytes(pt[:K_CS_SIZE])
        self._n_c2 = gen_nonce(self.rng)
        request = self._protect(
            self.k_ci,
            self.idp_id,
            MessageType.ASSERTION_REQUEST,
            self._n_c2 + entity_bytes(self.sp_id),
        )
        self.transition(ClientState.AWAIT_ASSERTION)
        return [request]

    # the assertion is opaque here; the SP checks its signature
    def _on_assertion(self, m: Message) -> List[Message]:
        pt = self._unprotect(self.k_ci, m)
        expect_length(pt, ASSERTION_PLAINTEXT, "assertion")
        expect_echo(pt[ASSERTION_SIZE:], self._n_c2, "assertion")
        self.assertion = pt[:ASSERTION_SIZE]
        self._n_c3 = gen_nonce(self.rng)
        request = self._protect(
            self.k_cs, self.sp_id, MessageType.SERVICE_REQUEST, self.assertion + self._n_c3
        )
        self.transition(ClientState.AWAIT_SERVICE)
        return [request]

    def _on_service(self, m: Message) -> List[Message]:
        pt = self._unprotect(self.k_cs, m)
        expect_length(pt, SERVICE_PLAINTEXT, "service")
        expect_echo(pt[1 : 1 + NONCE_SIZE], self._n_c3, "service")
        self.status = pt[0]
        if self.status != STATUS_GRANTED:
            raise ProtocolAbort(AbortReason.DENIED, f"status 0x{self.status:02x}")
        self.granted = True
        self.transition(ClientState.DONE)
        logger.info("granted role=client entity=%06x sp=%06x", self.entity_id, self.sp_id)
        return []
