"""Portable seeded randomness for instance generation.

Generated instances must be bit-reproducible from ``(spec, seed)`` on any
platform and Python version, so all sampling here is fixed 64-bit integer
arithmetic (a splitmix64 sequence) rather than ``random.Random``, whose
algorithms are free to change between releases.  Descriptor files record
:data:`PRNG_NAME` so the sampling scheme is versioned.
"""
from __future__ import annotations

from typing import Sequence, TypeVar

PRNG_NAME = "splitmix64/v1"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

T = TypeVar("T")


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _fnv1a(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & _MASK
    return h


class SplitMix64:
    """splitmix64 stream with unbiased bounded draws."""

    __slots__ = ("_state",)

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n), rejection-sampled to avoid modulo bias."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        threshold = ((_MASK + 1) // n) * n
        while True:
            u = self.next_u64()
            if u < threshold:
                return u % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + self.randbelow(hi - lo + 1)

    def sample(self, items: Sequence[T], k: int) -> list[T]:
        """``k`` draws without replacement (partial Fisher-Yates)."""
        pool = list(items)
        if k > len(pool):
            raise ValueError("sample size exceeds population")
        for i in range(k):
            j = i + self.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


def stream(seed: int, name: str) -> SplitMix64:
    """Independent named substream of a master seed."""
    return SplitMix64(_mix((seed & _MASK) ^ _fnv1a(name.encode("utf-8"))))


def stream_seed(seed: int, name: str) -> int:
    """A 64-bit seed for handing a named substream to another generator."""
    return stream(seed, name).next_u64()
