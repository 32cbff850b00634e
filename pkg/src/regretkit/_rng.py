"""Seeded, portable random streams for game generation.

Random game instances must be reproducible from their seed alone, including
by reimplementations in other languages, so instead of relying on a library
generator whose stream may drift between releases we pin the exact
construction here:

 * integer stream: SplitMix64 (Steele, Lea & Flood 2014) — state advances by
   the odd constant 0x9E3779B97F4A7C15, output is the standard 64-bit
   finalizer with shifts 30/27/31;
 * uniforms: the top 53 bits of a draw, scaled by 2**-53 (in [0, 1));
 * normals: Box-Muller on uniform pairs, with u1 shifted into (0, 1] so the
   logarithm is finite; the second variate of each pair is cached.

The u64/uniform streams are bit-exact everywhere; normal variates are exact
up to the platform's libm (identical on any one platform, which is what the
determinism contract in the test suite asserts).
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1


class PortableRandom:
    """SplitMix64-based generator with uniform and normal variates."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """One double in [0, 1) from the top 53 bits of the stream."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        """One standard normal variate (Box-Muller, pair cached)."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53  # in (0, 1]
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_normal = radius * math.sin(theta)
        return radius * math.cos(theta)

    def uniforms(self, count: int) -> list[float]:
        return [self.uniform() for _ in range(count)]

    def normals(self, count: int) -> list[float]:
        return [self.normal() for _ in range(count)]
