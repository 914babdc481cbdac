"""
Per-role instrumentation.

Crypto primitives call `count()`; the counter that receives the increment is
whichever role is currently inside `RoleMeter.measure()` in this context.
Outside a measured block the call is a no-op, so primitives stay usable on
their own.
"""

import time
from contextlib import contextmanager
from contextvars import ContextVar
from functools import wraps
from typing import Callable, Iterator, Optional, TypeVar

from app.models.schemas import OpCounters

F = TypeVar("F", bound=Callable)

_active: ContextVar[Optional["RoleMeter"]] = ContextVar("flat_active_meter", default=None)


def count(op: str) -> None:
    meter = _active.get()
    if meter is not None:
        setattr(meter.ops, op, getattr(meter.ops, op) + 1)


class RoleMeter:
    """Op counters plus CPU and wall time spent inside protocol handlers."""

    def __init__(self) -> None:
        self.ops = OpCounters()
        self.cpu_ns = 0
        self.wall_ns = 0

    @contextmanager
    def measure(self) -> Iterator["RoleMeter"]:
        if _active.get() is self:
            yield self
            return
        token = _active.set(self)
        cpu0 = time.thread_time_ns()
        wall0 = time.perf_counter_ns()
        try:
            yield self
        finally:
            self.cpu_ns += time.thread_time_ns() - cpu0
            self.wall_ns += time.perf_counter_ns() - wall0
            _active.reset(token)

    def reset(self) -> None:
        self.ops = OpCounters()
        self.cpu_ns = 0
        self.wall_ns = 0


def metered(method: F) -> F:
    """Run a role method inside the role's meter."""

    @wraps(method)
    def wrapper(self, *args, **kwargs):
        with self.meter.measure():
            return method(self, *args, **kwargs)

    return wrapper  # type: ignore[return-value]
