"""
Randomness sources.

Production code draws from the operating system CSPRNG. The memory network and
material setup use a seeded stream instead so a (seed, scenario) pair fully
determines every nonce, IV, ephemeral key and signature nonce.
"""

import hashlib
import hmac
import secrets
import threading
from abc import ABC, abstractmethod
from typing import Sequence, TypeVar, Union

T = TypeVar("T")
Seed = Union[int, str, bytes]


class RandomSource(ABC):
    """Byte source used by every randomized crypto operation."""

    @abstractmethod
    def token_bytes(self, n: int) -> bytes:
        pass

    def scalar(self, order: int) -> int:
        """Uniform integer in [1, order - 1] by rejection sampling."""
        size = (order.bit_length() + 7) // 8
        while True:
            candidate = int.from_bytes(self.token_bytes(size), "big")
            if 1 <= candidate < order:
                return candidate

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        size = (bound.bit_length() + 7) // 8 + 1
        limit = (1 << (8 * size)) - ((1 << (8 * size)) % bound)
        while True:
            candidate = int.from_bytes(self.token_bytes(size), "big")
            if candidate < limit:
                return candidate % bound

    def choice(self, items: Sequence[T]) -> T:
        return items[self.below(len(items))]


class SystemRandomSource(RandomSource):
    """OS CSPRNG; safe for concurrent use."""

    def token_bytes(self, n: int) -> bytes:
        return secrets.token_bytes(n)


def _seed_bytes(seed: Seed) -> bytes:
    if isinstance(seed, bytes):
        return seed
    if isinstance(seed, int):
        return seed.to_bytes(16, "big", signed=True)
    return seed.encode("utf-8")


class SeededRandomSource(RandomSource):
    """Deterministic HMAC-SHA256 counter stream keyed by a seed."""

    def __init__(self, seed: Seed):
        self._key = hashlib.sha256(b"flat-rng|" + _seed_bytes(seed)).digest()
        self._counter = 0
        self._buffer = b""
        self._lock = threading.Lock()

    def token_bytes(self, n: int) -> bytes:
        with self._lock:
            while len(self._buffer) < n:
                block = hmac.new(self._key, self._counter.to_bytes(8, "big"), hashlib.sha256)
                self._buffer += block.digest()
                self._counter += 1
            out, self._buffer = self._buffer[:n], self._buffer[n:]
            return out

    def derive(self, label: str) -> "SeededRandomSource":
        """Independent child stream; same parent key and label give the same stream."""
        return SeededRandomSource(self._key + b"|" + label.encode("utf-8"))


system_random = SystemRandomSource()
