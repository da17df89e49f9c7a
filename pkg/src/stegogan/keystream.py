"""SplitMix64, the generator behind keyed pixel selection.

SplitMix64 (Steele, Lea & Flood 2014) is counter based: output ``i`` (0-based)
of the stream seeded with ``seed`` is ``mix(seed + (i + 1) * GAMMA mod 2**64)``
where

    mix(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
             return z ^ (z >> 31)

with all arithmetic modulo 2**64.  Because any block of outputs is a pure
function of (seed, index), the stream is computed vectorised here and can be
reproduced by any implementation that follows the three lines above.
"""
from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64_scalar(seed: int, index: int) -> int:
    """Reference scalar implementation, used to cross-check the vector path."""
    z = (seed + (index + 1) * GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the stream as uint64."""
    seed &= MASK64
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + idx * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def bounded(words: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Map 64-bit words to integers in [0, bound) as ((w >> 32) * bound) >> 32.

    Requires bound <= 2**32; the product then fits in 64 bits.
    """
    bounds = np.asarray(bounds, dtype=np.uint64)
    return ((words >> np.uint64(32)) * bounds) >> np.uint64(32)


def derive_seed(master: int, *labels: int) -> int:
    """Fold integer labels into a child seed (one SplitMix64 step per label)."""
    s = master & MASK64
    for lab in labels:
        s = splitmix64_scalar(s ^ (lab & MASK64), 0)
    return s
