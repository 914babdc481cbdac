import threading
import time
from abc import ABC, abstractmethod


class Clock(ABC):
    """Time source shared by the roles of one session."""

    @abstractmethod
    def now(self) -> float:
        """Current time in unix seconds."""

    def now_ms(self) -> int:
        return int(self.now() * 1000)


class SystemClock(Clock):
    def now(self) -> float:
        return time.time()


class SimulatedClock(Clock):
    """Millisecond clock that only moves when told to."""

    def __init__(self, start_s: int):
        self._ms = start_s * 1000
        self._lock = threading.Lock()

    def now(self) -> float:
        return self._ms / 1000

    def now_ms(self) -> int:
        return self._ms

    def advance(self, ms: int) -> int:
        if ms < 0:
            raise ValueError("clock cannot move backwards")
        with self._lock:
            self._ms += ms
            return self._ms

    def advance_to(self, ms: int) -> int:
        with self._lock:
            self._ms = max(self._ms, ms)
            return self._ms
