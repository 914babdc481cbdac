"""
Transport contracts shared by the memory network and the UDP binding.

Interceptors see wire bytes only: a frame plus its routing context. They never
get a reference to a role, so no key or state can leak to adversary code.
"""

from abc import ABC, abstractmethod
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union


@dataclass(frozen=True)
class Endpoint:
    """An addressable party. `address` is a queue id (memory) or (host, port) (UDP)."""
    entity_id: int
    address: Any


# =============================================================================
# Interceptor actions
# =============================================================================

@dataclass(frozen=True)
class Deliver:
    pass


@dataclass(frozen=True)
class Drop:
    pass


@dataclass(frozen=True)
class Duplicate:
    """Deliver the frame `n` times."""
    n: int = 2


@dataclass(frozen=True)
class Replay:
    """Deliver the frame, then re-deliver recorded frame `index` to its original recipient."""
    index: int


@dataclass(frozen=True)
class Tamper:
    """Deliver the frame with `frame[offset] ^= mask`; negative offsets count from the end."""
    offset: int
    mask: int = 0x01


@dataclass(frozen=True)
class Inject:
    """Deliver the frame, then deliver `raw` to `dst` (default: the dst in raw's header)."""
    raw: bytes
    dst: Optional[int] = None


InterceptorAction = Union[Deliver, Drop, Duplicate, Replay, Tamper, Inject]


@dataclass(frozen=True)
class FrameContext:
    index: int
    time_ms: int
    src: int
    dst: int


@dataclass(frozen=True)
class TranscriptEntry:
    time_ms: int
    src: int
    dst: int
    frame: bytes

    def to_dict(self) -> Dict[str, Any]:
        return {"time": self.time_ms, "src": self.src, "dst": self.dst, "frame": self.frame.hex()}


def tamper(frame: bytes, action: Tamper) -> bytes:
    if not frame:
        return frame
    data = bytearray(frame)
    data[action.offset % len(data)] ^= action.mask
    return bytes(data)


class Interceptor(ABC):
    """On-path adversary. Every transmitted frame passes through `record_and_act`."""

    name: str = "interceptor"

    def __init__(self) -> None:
        self.transcript: List[TranscriptEntry] = []

    def record_and_act(self, frame: bytes, context: FrameContext) -> InterceptorAction:
        self.transcript.append(TranscriptEntry(context.time_ms, context.src, context.dst, frame))
        action = self.act(frame, context)
        if isinstance(action, Replay) and not 0 <= action.index < len(self.transcript):
            raise IndexError(f"replay index {action.index} not recorded")
        return action

    @abstractmethod
    def act(self, frame: bytes, context: FrameContext) -> InterceptorAction:
        pass


class PassThrough(Interceptor):
    name = "passive"

    def act(self, frame: bytes, context: FrameContext) -> InterceptorAction:
        return Deliver()


# =============================================================================
# Traffic accounting
# =============================================================================

@dataclass
class Traffic:
    tx_bytes: int = 0
    rx_bytes: int = 0
    tx_msgs: int = 0
    rx_msgs: int = 0


@dataclass
class TrafficCounter:
    by_entity: Dict[int, Traffic] = field(default_factory=lambda: defaultdict(Traffic))

    def sent(self, entity_id: int, size: int) -> None:
        traffic = self.by_entity[entity_id]
        traffic.tx_bytes += size
        traffic.tx_msgs += 1

    def received(self, entity_id: int, size: int) -> None:
        traffic = self.by_entity[entity_id]
        traffic.rx_bytes += size
        traffic.rx_msgs += 1

    def of(self, entity_id: int) -> Traffic:
        return self.by_entity[entity_id]
