"""Deterministic, portable random number generation.

Every stochastic step in this package (train/test splitting, synthetic
corpus generation, randomized self-checks) draws from the SplitMix64
generator implemented here, so that runs reproduce bit-for-bit from a
64-bit seed regardless of platform, Python version or library versions.

The generator and all derived quantities are pinned exactly; any
implementation in any language following these rules produces the same
integer stream.

Core recurrence (all arithmetic mod 2**64)::

    state_{k+1} = state_k + 0x9E3779B97F4A7C15
    output_k    = mix64(state_{k+1})

    mix64(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

Derived quantities:

* uniform double in [0, 1):   ``(output >> 11) * 2.0**-53``
* integer in [0, n):          ``(output * n) >> 64`` (multiply-shift)
* shuffle: Fisher-Yates from the last element down; the swap partner of
  position ``i`` is ``below(i + 1)``
* Gaussian deviate: consumes exactly two outputs ``(u1, u2)`` converted
  to uniforms as above; ``u1`` is clamped up to ``2.0**-53`` if zero;
  ``z = sqrt(-2 ln u1) * cos(2 pi u2)``
* derived stream seeds: ``substream(seed, index) = mix64(seed ^ ((index + 1)
  * 0x9E3779B97F4A7C15))`` - used to give every trial / every generated
  patch its own independent stream.

The raw 64-bit stream is exact everywhere; the float transforms are
deterministic for IEEE-754 doubles with a correctly rounded libm.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_U53 = 2.0**-53


def mix64(z: int) -> int:
    """SplitMix64 output finalizer on a 64-bit integer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
    return z ^ (z >> 31)


def substream(seed: int, index: int) -> int:
    """Seed for the index-th derived stream of a master seed."""
    if index < 0:
        raise ValueError("substream index must be >= 0")
    return mix64((seed & _MASK64) ^ (((index + 1) * _GOLDEN) & _MASK64))


class SplitMix64:
    """Sequential SplitMix64 stream with vectorized block access.

    The block methods advance the state exactly as the equivalent number
    of scalar calls would; interleaving scalar and block draws keeps the
    stream consistent.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def u64_block(self, n: int) -> np.ndarray:
        """n raw outputs as a uint64 array (bitwise equal to n scalar calls)."""
        if n < 0:
            raise ValueError("block size must be >= 0")
        idx = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self._state) + idx * np.uint64(_GOLDEN)
        self._state = (self._state + n * _GOLDEN) & _MASK64
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
        return z ^ (z >> np.uint64(31))

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _U53

    def random_block(self, n: int) -> np.ndarray:
        return (self.u64_block(n) >> np.uint64(11)).astype(np.float64) * _U53

    def below(self, n: int) -> int:
        """Integer uniform in [0, n) via 64-bit multiply-shift."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        return (self.next_u64() * n) >> 64

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle (documented draw order)."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def gauss(self) -> float:
        """Standard normal deviate; consumes exactly two outputs."""
        return float(self.gauss_block(1)[0])

    def gauss_block(self, n: int) -> np.ndarray:
        raw = self.u64_block(2 * n)
        u = (raw >> np.uint64(11)).astype(np.float64) * _U53
        u1 = np.maximum(u[0::2], _U53)
        u2 = u[1::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
