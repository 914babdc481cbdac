"""
Shared machinery for the Client, SP and IdP state machines of both protocols.

A role consumes one inbound frame at a time and returns the messages it wants
sent. Failures raised while handling a frame become an Aborted transition with
an AbortReason; they never escape to the transport driver.
"""

import logging
from abc import ABC, abstractmethod
from enum import Enum, IntEnum
from typing import Dict, List, Optional, Tuple

from app.config.settings import settings
from app.core.exceptions import (
    AssertionFormatError,
    AuthenticationError,
    CertificateError,
    CryptoError,
    FlatError,
    PointDecodeError,
    ProtocolAbort,
    ProtocolOrderError,
    SignatureFormatError,
    WireError,
)
from app.core.metering import RoleMeter, metered
from app.core.wire import Message, MessageType, Namespace, decode_message
from app.models.schemas import AbortReason, AbortRecord, RoleName
from app.utils.clock import Clock
from app.utils.rng import RandomSource

logger = logging.getLogger(__name__)


def abort_reason_for(exc: FlatError) -> AbortReason:
    """Map a library error raised during message handling to its abort reason."""
    if isinstance(exc, ProtocolAbort):
        return exc.reason
    if isinstance(exc, AssertionFormatError):
        return AbortReason.ASSERTION
    if isinstance(exc, AuthenticationError):
        return AbortReason.MAC
    if isinstance(exc, SignatureFormatError):
        return AbortReason.SIGNATURE
    if isinstance(exc, (CertificateError, PointDecodeError)):
        return AbortReason.CERTIFICATE
    if isinstance(exc, CryptoError):
        return AbortReason.DECRYPT
    if isinstance(exc, WireError):
        return AbortReason.FORMAT
    return AbortReason.UNEXPECTED


class SequenceState:
    """Per-peer, per-direction sequence counters, starting at 0, mod 256."""

    def __init__(self) -> None:
        self._tx: Dict[int, int] = {}
        self._rx: Dict[int, int] = {}

    def next_tx(self, peer: int) -> int:
        seq = self._tx.get(peer, 0)
        self._tx[peer] = (seq + 1) & 0xFF
        return seq

    def expected_rx(self, peer: int) -> int:
        return self._rx.get(peer, 0)

    def accept(self, peer: int, seq: int) -> None:
        """Stale seq is a replay; a gap means a lost or reordered message."""
        expected = self.expected_rx(peer)
        if seq < expected:
            raise ProtocolAbort(AbortReason.REPLAY, f"seq {seq} < expected {expected}")
        if seq > expected:
            raise ProtocolAbort(AbortReason.SEQUENCE, f"seq {seq} > expected {expected}")
        self._rx[peer] = (seq + 1) & 0xFF

    def reset(self) -> None:
        self._tx.clear()
        self._rx.clear()


class BaseRole(ABC):
    """Base class for protocol roles."""

    role_name: RoleName
    namespace: Namespace = MessageType

    def __init__(self, entity_id: int, clock: Clock, rng: RandomSource):
        self.entity_id = entity_id
        self.clock = clock
        self.rng = rng
        self.meter = RoleMeter()
        self.seqs = SequenceState()
        self.aborts: List[AbortRecord] = []

    # -------------------------------------------------------------------------
    # Driver interface
    # -------------------------------------------------------------------------

    @property
    def deadline_ms(self) -> Optional[int]:
        """Simulated time at which `on_timeout` should fire; None when not waiting."""
        return None

    @property
    @abstractmethod
    def is_terminal(self) -> bool:
        pass

    def receive(self, frame: bytes) -> List[Message]:
        """Decode one datagram and hand it to the FSM; undecodable frames are dropped."""
        try:
            message = decode_message(frame, self.namespace)
        except WireError as exc:
            logger.warning(
                "drop role=%s entity=%06x reason=format detail=%s",
                self.role_name.value, self.entity_id, exc,
            )
            return []
        if message.dst != self.entity_id:
            logger.warning(
                "drop role=%s entity=%06x reason=misrouted dst=%06x",
                self.role_name.value, self.entity_id, message.dst,
            )
            return []
        return self.on_message(message)

    @metered
    def on_message(self, m: Message) -> List[Message]:
        logger.debug(
            "recv role=%s entity=%06x type=%s seq=%d src=%06x",
            self.role_name.value, self.entity_id, m.msg_type.name, m.seq, m.src,
        )
        try:
            return self.handle(m)
        except ProtocolOrderError:
            raise
        except FlatError as exc:
            reason = abort_reason_for(exc)
            self.on_abort(reason, m, str(exc))
            return getattr(exc, "outbound", [])

    @metered
    def on_timeout(self) -> List[Message]:
        return self.handle_timeout()

    # -------------------------------------------------------------------------
    # Subclass hooks
    # -------------------------------------------------------------------------

    @abstractmethod
    def handle(self, m: Message) -> List[Message]:
        """Process one inbound message in the current state."""
        pass

    def handle_timeout(self) -> List[Message]:
        return []

    def on_abort(self, reason: AbortReason, m: Optional[Message], detail: str) -> None:
        self.record_abort(reason, m, detail)

    # -------------------------------------------------------------------------
    # Helpers
    # -------------------------------------------------------------------------

    def record_abort(
        self, reason: AbortReason, m: Optional[Message] = None, detail: str = ""
    ) -> AbortRecord:
        record = AbortRecord(
            role=self.role_name,
            entity_id=self.entity_id,
            reason=reason,
            msg_type=m.msg_type.name if m is not None else None,
            time_ms=self.clock.now_ms(),
            detail=detail,
        )
        self.aborts.append(record)
        logger.warning(
            "abort role=%s entity=%06x reason=%s msg_type=%s detail=%s",
            self.role_name.value, self.entity_id, reason.value, record.msg_type, detail,
        )
        return record

    def message(self, msg_type, dst: int, seq: int, payload: bytes) -> Message:
        logger.debug(
            "send role=%s entity=%06x type=%s seq=%d dst=%06x len=%d",
            self.role_name.value, self.entity_id, msg_type.name, seq, dst, len(payload),
        )
        return Message(msg_type=msg_type, seq=seq, src=self.entity_id, dst=dst, payload=payload)

    @property
    def first_abort(self) -> Optional[AbortRecord]:
        return self.aborts[0] if self.aborts else None


class ClientRole(BaseRole):
    """Client side FSM skeleton: strict expectations, await timers, restarts.

    Subclasses declare their state enum through `idle_state`, `done_state` and
    `aborted_state`, emit the opening message in `begin`, and name the single
    (type, source) pair that advances the current state in `expectation`.
    """

    role_name = RoleName.CLIENT
    idle_state: Enum
    done_state: Enum
    aborted_state: Enum

    def __init__(
        self,
        entity_id: int,
        idp_id: int,
        clock: Clock,
        rng: RandomSource,
        await_timeout_ms: Optional[int] = None,
        max_restarts: Optional[int] = None,
    ):
        super().__init__(entity_id, clock, rng)
        self.idp_id = idp_id
        self.sp_id: Optional[int] = None
        self.state = self.idle_state
        self.restarts = 0
        self.granted = False
        self.await_timeout_ms = (
            await_timeout_ms if await_timeout_ms is not None else settings.await_timeout_ms
        )
        self.max_restarts = max_restarts if max_restarts is not None else settings.max_restarts
        self._deadline: Optional[int] = None

    @property
    def deadline_ms(self) -> Optional[int]:
        return self._deadline

    @property
    def is_terminal(self) -> bool:
        return self.state in (self.done_state, self.aborted_state)

    @property
    def is_waiting(self) -> bool:
        return self.state != self.idle_state and not self.is_terminal

    @metered
    def start(self, sp_id: int) -> List[Message]:
        if self.is_waiting:
            raise ProtocolOrderError(f"session already running in state {self.state.value}")
        self.sp_id = sp_id
        self.restarts = 0
        self.granted = False
        return self._restart()

    def _restart(self) -> List[Message]:
        self.seqs.reset()
        return self.begin()

    def transition(self, state: Enum) -> None:
        logger.debug(
            "state role=client entity=%06x %s -> %s", self.entity_id, self.state.value, state.value
        )
        self.state = state
        self._deadline = self.clock.now_ms() + self.await_timeout_ms if self.is_waiting else None

    def handle(self, m: Message) -> List[Message]:
        if self.state == self.idle_state:
            raise ProtocolOrderError("idle client received a message")
        if self.is_terminal:
            logger.info(
                "drop role=client entity=%06x state=%s type=%s",
                self.entity_id, self.state.value, m.msg_type.name,
            )
            return []
        if m.src in (self.idp_id, self.sp_id) and m.seq < self.seqs.expected_rx(m.src):
            raise ProtocolAbort(AbortReason.REPLAY, f"stale seq {m.seq} from {m.src:06x}")
        if (m.msg_type, m.src) != self.expectation():
            raise ProtocolAbort(
                AbortReason.UNEXPECTED, f"{m.msg_type.name} from {m.src:06x} in {self.state.value}"
            )
        self.seqs.accept(m.src, m.seq)
        return self.dispatch(m)

    def handle_timeout(self) -> List[Message]:
        if not self.is_waiting:
            return []
        if self.restarts < self.max_restarts:
            self.restarts += 1
            logger.info(
                "restart role=client entity=%06x attempt=%d state=%s",
                self.entity_id, self.restarts, self.state.value,
            )
            return self._restart()
        self.on_abort(AbortReason.TIMEOUT, None, f"no progress after {self.restarts} restarts")
        return []

    def on_abort(self, reason: AbortReason, m: Optional[Message], detail: str) -> None:
        self.transition(self.aborted_state)
        self.record_abort(reason, m, detail)

    @abstractmethod
    def begin(self) -> List[Message]:
        """Emit the opening message of a (re)started session."""
        pass

    @abstractmethod
    def expectation(self) -> Tuple[IntEnum, int]:
        pass

    @abstractmethod
    def dispatch(self, m: Message) -> List[Message]:
        pass
