"""Counter-based deterministic random numbers.

Every draw is a pure function of (seed, key..., counter), so parallel
consumers can generate identical streams without shared state and results
are reproducible across platforms.  The mixer is the SplitMix64 finalizer,
which passes standard statistical batteries and needs only 64-bit integer
arithmetic.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(x: int) -> int:
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _combine(seed: int, *keys: int) -> int:
    h = _mix(seed & _MASK)
    for k in keys:
        h = _mix((h + _GOLDEN + (k & _MASK)) & _MASK)
    return h


def rand_u64(seed: int, *keys: int) -> int:
    """One 64-bit word for the given key tuple."""
    return _combine(seed, *keys)


def rand_uniform(seed: int, *keys: int) -> float:
    """One double in [0, 1) for the given key tuple."""
    return _combine(seed, *keys) / 2.0**64


class KeyedStream:
    """A counter-based stream anchored at (seed, key...).

    Draw i of the stream is independent of every other draw; the object only
    tracks how many draws were taken so sequential code stays terse.
    """

    def __init__(self, seed: int, *keys: int):
        self._seed = seed
        self._keys = keys
        self._counter = 0

    def uniform(self) -> float:
        u = rand_uniform(self._seed, *self._keys, self._counter)
        self._counter += 1
        return u

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def randint(self, n: int) -> int:
        """Integer in [0, n) (n <= 2**32 keeps modulo bias below 2**-32)."""
        u = rand_u64(self._seed, *self._keys, self._counter)
        self._counter += 1
        return u % n


def sample_without_replacement(population: list[int], c: int, seed: int, *keys: int) -> list[int]:
    """Draw min(c, len(population)) items uniformly, deterministically keyed.

    Partial Fisher-Yates over a copy; output order is the draw order.
    """
    pool = list(population)
    take = min(c, len(pool))
    stream = KeyedStream(seed, *keys)
    for i in range(take):
        j = i + stream.randint(len(pool) - i)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:take]
