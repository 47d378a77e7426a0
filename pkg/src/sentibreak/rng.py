"""Portable seeded random numbers.

Counter-based SplitMix64: draw ``i`` (0-based, counting every 64-bit word
ever produced by this generator) is ``mix(seed + (i + 1) * GAMMA) mod 2**64``
with

    mix(z): z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
            z = (z ^ (z >> 27)) * 0x94D049BB133111EB
            z =  z ^ (z >> 31)

Uniforms take the top 53 bits: ``(word >> 11) * 2**-53``. Normals use one
Box-Muller pair per variate, ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``, with
``u1, u2`` consecutive uniforms. Integers below ``k`` are ``floor(u * k)``.
Everything is plain 64-bit integer and IEEE double arithmetic, so other
languages can reproduce the streams.
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


class PortableRng:
    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.counter = 0

    def words(self, size: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + 1 + size, dtype=np.uint64)
        self.counter += size
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
            return z ^ (z >> np.uint64(31))

    def uniform(self, size: int) -> np.ndarray:
        return (self.words(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, size: int) -> np.ndarray:
        u = self.uniform(2 * size).reshape(size, 2)
        return np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])

    def integers(self, high: int, size: int) -> np.ndarray:
        return np.floor(self.uniform(size) * high).astype(np.int64)

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates: for i = n-1 .. 1 swap i with floor(u * (i + 1))."""
        items = list(range(n))
        if n < 2:
            return items
        u = self.uniform(n - 1)
        for step, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[step] * (i + 1))
            items[i], items[j] = items[j], items[i]
        return items
