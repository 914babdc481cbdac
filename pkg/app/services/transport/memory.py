"""
Deterministic in-memory network.

Each endpoint owns a FIFO queue. Delivery order across endpoints is chosen by
a seeded scheduler, and time only moves through the simulated clock: a frame
becomes visible `latency_ms` after it was sent, and polling an empty queue
advances the clock by the poll timeout.
"""

import json
import logging
from collections import deque
from typing import Deque, Dict, List, Optional, Tuple

from app.config.settings import settings
from app.core.exceptions import TransportError, UnknownEndpointError
from app.core.wire import ENTITY_ID_SIZE
from app.services.transport.base import (
    Deliver,
    Drop,
    Duplicate,
    Endpoint,
    FrameContext,
    Inject,
    Interceptor,
    PassThrough,
    Replay,
    Tamper,
    TrafficCounter,
    TranscriptEntry,
    tamper,
)
from app.utils.clock import SimulatedClock
from app.utils.rng import RandomSource

logger = logging.getLogger(__name__)

_Queued = Tuple[int, int, bytes]


class MemoryNetwork:
    def __init__(
        self,
        clock: SimulatedClock,
        rng: RandomSource,
        interceptor: Optional[Interceptor] = None,
        latency_ms: Optional[int] = None,
    ):
        self.clock = clock
        self.rng = rng
        self.interceptor = interceptor if interceptor is not None else PassThrough()
        self.latency_ms = latency_ms if latency_ms is not None else settings.link_latency_ms
        self.traffic = TrafficCounter()
        self.deliveries: List[TranscriptEntry] = []
        self._queues: Dict[int, Deque[_Queued]] = {}

    def register(self, entity_id: int) -> Endpoint:
        if entity_id in self._queues:
            raise TransportError(f"endpoint {entity_id:06x} already registered")
        self._queues[entity_id] = deque()
        return Endpoint(entity_id=entity_id, address=entity_id)

    def endpoint(self, entity_id: int) -> Endpoint:
        if entity_id not in self._queues:
            raise UnknownEndpointError(f"endpoint {entity_id:06x} not registered")
        return Endpoint(entity_id=entity_id, address=entity_id)

    def _queue(self, ep: Endpoint) -> Deque[_Queued]:
        queue = self._queues.get(ep.address)
        if queue is None:
            raise UnknownEndpointError(f"endpoint {ep.entity_id:06x} not registered")
        return queue

    def _enqueue(self, src: int, dst: int, frame: bytes) -> None:
        queue = self._queues.get(dst)
        if queue is None:
            logger.warning("undeliverable frame src=%06x dst=%06x", src, dst)
            return
        queue.append((self.clock.now_ms() + self.latency_ms, src, frame))

    # -------------------------------------------------------------------------
    # Operations
    # -------------------------------------------------------------------------

    def send(self, src: Endpoint, dst: Endpoint, frame: bytes) -> None:
        self._queue(src)
        self._queue(dst)
        self.traffic.sent(src.entity_id, len(frame))
        context = FrameContext(
            index=len(self.interceptor.transcript),
            time_ms=self.clock.now_ms(),
            src=src.entity_id,
            dst=dst.entity_id,
        )
        action = self.interceptor.record_and_act(frame, context)
        self._apply(action, src.entity_id, dst.entity_id, frame)

    def _apply(self, action, src: int, dst: int, frame: bytes) -> None:
        if isinstance(action, Drop):
            logger.debug("interceptor drop src=%06x dst=%06x", src, dst)
            return
        if isinstance(action, Tamper):
            self._enqueue(src, dst, tamper(frame, action))
            return
        copies = action.n if isinstance(action, Duplicate) else 1
        for _ in range(copies):
            self._enqueue(src, dst, frame)
        if isinstance(action, Replay):
            entry = self.interceptor.transcript[action.index]
            logger.debug("interceptor replay index=%d dst=%06x", action.index, entry.dst)
            self._enqueue(entry.src, entry.dst, entry.frame)
        elif isinstance(action, Inject):
            target = action.dst
            if target is None and len(action.raw) >= 2 + 2 * ENTITY_ID_SIZE:
                target = int.from_bytes(action.raw[5:8], "big")
            if target is not None:
                self._enqueue(src, target, action.raw)
        elif not isinstance(action, (Deliver, Duplicate)):
            raise TransportError(f"unknown interceptor action {action!r}")

    def ready(self) -> List[Endpoint]:
        return [
            Endpoint(entity_id=eid, address=eid)
            for eid in sorted(self._queues)
            if self._queues[eid]
        ]

    def earliest_delivery_ms(self) -> Optional[int]:
        heads = [queue[0][0] for queue in self._queues.values() if queue]
        return min(heads) if heads else None

    def pick_ready(self) -> Optional[Endpoint]:
        """Seeded choice among endpoints with pending frames."""
        ready = self.ready()
        return self.rng.choice(ready) if ready else None

    def poll(self, at: Endpoint, timeout_ms: int) -> Optional[bytes]:
        queue = self._queue(at)
        if not queue:
            self.clock.advance(max(timeout_ms, 0))
            return None
        deliver_at, src, frame = queue.popleft()
        self.clock.advance_to(deliver_at)
        self.traffic.received(at.entity_id, len(frame))
        self.deliveries.append(TranscriptEntry(self.clock.now_ms(), src, at.entity_id, frame))
        return frame

    # -------------------------------------------------------------------------
    # Transcript
    # -------------------------------------------------------------------------

    @property
    def transcript(self) -> List[TranscriptEntry]:
        return self.interceptor.transcript

    def export_transcript(self) -> List[dict]:
        return [entry.to_dict() for entry in self.transcript]

    def transcript_json(self) -> str:
        return json.dumps(self.export_transcript(), indent=2)


def mem_send(net: MemoryNetwork, src: Endpoint, dst: Endpoint, frame: bytes) -> None:
    net.send(src, dst, frame)


def mem_poll(net: MemoryNetwork, at: Endpoint, timeout_ms: int) -> Optional[bytes]:
    """Next frame for `at`, or None after advancing the clock by `timeout_ms`."""
    return net.poll(at, timeout_ms)
