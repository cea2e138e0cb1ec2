"""Counter-based deterministic RNG for reproducible synthetic data and splits.

SplitMix64 with the standard constants (Steele, Lea & Flood 2014). Pure
integer arithmetic, so streams are bit-identical across platforms. Every
draw is a function of (seed, counter) only.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    """One SplitMix64 finalization round of a 64-bit value."""
    x = (x + _GAMMA) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class CounterRng:
    """Stateless-style RNG: word i of stream `seed` is splitmix64(seed + i*gamma)."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._i = 0

    def next_u64(self) -> int:
        v = splitmix64((self.seed + self._i * _GAMMA) & _MASK64)
        self._i += 1
        return v

    def next_bit(self) -> int:
        return self.next_u64() >> 63

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (exact, unbiased)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def bernoulli(self, p: float) -> bool:
        """True with probability p, decided by integer threshold on one u64 draw."""
        threshold = int(round(p * float(1 << 64)))
        return self.next_u64() < threshold

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]
