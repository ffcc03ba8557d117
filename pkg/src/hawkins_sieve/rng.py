"""Counter-based pseudo-random numbers (splitmix64).

All randomness in this package comes from splitmix64: draw ``i`` from seed
``s`` is ``finalize(s + i * GOLDEN_GAMMA)``, a pure function of ``(s, i)``.
That makes every stream counter-based (O(1) skip to any position) and makes
parallel path generation trivially reproducible: path ``i`` of a run uses
``split_seed(master_seed, i)`` and never shares state with its siblings.
"""

from __future__ import annotations

import numpy as np
from numba import njit

RNG_ALGORITHM = "splitmix64"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

U64 = np.uint64
_GOLDEN_U = U64(_GOLDEN)
_MIX1_U = U64(_MIX1)
_MIX2_U = U64(_MIX2)
# 2**-53; (z >> 11) * 2**-53 is uniform on [0, 1) with 53 random bits.
_INV_2_53 = 1.0 / 9007199254740992.0


def mix64(x: int) -> int:
    """Avalanche finalizer of splitmix64 (bijective on 64-bit integers)."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def split_seed(master_seed: int, index: int) -> int:
    """Derive the seed for stream ``index`` from a 64-bit master seed."""
    if index < 0:
        raise ValueError("stream index must be >= 0")
    return mix64((master_seed ^ index) & _MASK64)


@njit(cache=True, inline="always")
def _mix64_u(z):
    z = (z ^ (z >> U64(30))) * _MIX1_U
    z = (z ^ (z >> U64(27))) * _MIX2_U
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def draw_u64(seed, counter):
    """Raw 64-bit draw number ``counter`` (0-based) of stream ``seed``."""
    return _mix64_u(seed + (counter + U64(1)) * _GOLDEN_U)


@njit(cache=True, inline="always")
def draw_unit(seed, counter):
    """Uniform double in [0, 1): draw ``counter`` of stream ``seed``."""
    return (draw_u64(seed, counter) >> U64(11)) * _INV_2_53


def draw_unit_py(seed: int, counter: int) -> float:
    """Pure-Python mirror of :func:`draw_unit` (used by tests)."""
    z = mix64((seed + ((counter + 1) * _GOLDEN)) & _MASK64)
    return (z >> 11) * _INV_2_53
