"""Random-sieve path generation over a finite window [2, N].

Two distributionally equivalent samplers are provided:

* ``sample_path_conditional`` walks m = 2..N once, including m with the
  conditional probability y_m given the history so far (single probability
  space / measure-recursion view).  O(N) time, one uniform per integer.
* ``sample_path_rounds`` replays the sequential sieve: pick the smallest
  survivor P, keep it, then delete every larger survivor independently with
  probability 1/P, until the window is exhausted.  Deletions only ever affect
  integers above the current minimum, so truncating the process to [2, N]
  changes nothing about the window's law.

Both are deterministic given (N, seed).  The survival weight
y_m = prod_{j<m, j in path} (1 - 1/j) is the inclusion probability of m given
its history; weights are recomputed from the membership bitmap on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np
from numba import njit

from .rng import _GOLDEN_U, _INV_2_53, U64, _mix64_u


@njit(cache=True)
def _conditional_block(seed, start_m, end_m, y0, out):
    """Fill ``out[i] = (start_m + i) in path`` and return the carried weight.

    Draw number (m - 1) of the stream decides integer m, so any block of the
    same stream sees the same uniforms regardless of how the window is split.
    """
    y = y0
    for m in range(start_m, end_m + 1):
        z = _mix64_u(seed + U64(m - 1) * _GOLDEN_U)
        u = (z >> U64(11)) * _INV_2_53
        if u < y:
            out[m - start_m] = True
            y *= 1.0 - 1.0 / m
    return y


@njit(cache=True)
def _rounds_kernel(seed, n, out, denom_shift):
    """Round-based sieve on [2, n]; one uniform per surviving candidate.

    ``denom_shift`` must be 0; the value 1 corrupts the deletion probability
    to 1/(P+1) and exists only as a negative control for equivalence tests.
    """
    surv = np.empty(n - 1, dtype=np.int64)
    for i in range(n - 1):
        surv[i] = i + 2
    count = n - 1
    ctr = U64(0)
    while count > 0:
        p = surv[0]
        out[p] = True
        q = 1.0 / (p + denom_shift)
        kept = 0
        for i in range(1, count):
            ctr += U64(1)
            z = _mix64_u(seed + ctr * _GOLDEN_U)
            u = (z >> U64(11)) * _INV_2_53
            if u >= q:
                surv[kept] = surv[i]
                kept += 1
        count = kept


@dataclass
class SievePath:
    """One realization of the random sieve restricted to [2, window_max].

    ``members[m]`` is True iff m is in the path; indices 0 and 1 are unused.
    Immutable after construction; safe to share across threads read-only.
    """

    window_max: int
    members: np.ndarray
    seed: int
    sampler: str
    _weights: np.ndarray | None = field(default=None, repr=False)

    def member_list(self) -> np.ndarray:
        return np.flatnonzero(self.members)

    def member_count(self) -> int:
        return int(np.count_nonzero(self.members))

    def weights(self) -> np.ndarray:
        """Array w with w[m] = y_m for 2 <= m <= window_max + 1.

        Computed by forward accumulation in increasing m (w[0] and w[1] are
        set to 1 but meaningless), then cached on the path.
        """
        if self._weights is None:
            n = self.window_max
            factors = np.ones(n + 2)
            m = np.arange(2, n + 1)
            factors[3 : n + 2] = np.where(self.members[2 : n + 1], 1.0 - 1.0 / m, 1.0)
            self._weights = np.cumprod(factors)
        return self._weights


def _check_window(n: int) -> None:
    if n < 2:
        raise ValueError(f"window max must be >= 2, got {n}")


def sample_path_conditional(n: int, seed: int) -> SievePath:
    """Sample a path on [2, n] by the conditional-inclusion walk."""
    _check_window(n)
    members = np.zeros(n + 1, dtype=np.bool_)
    _conditional_block(U64(seed), 2, n, 1.0, members[2:])
    return SievePath(window_max=n, members=members, seed=seed, sampler="conditional")


def sample_path_rounds(n: int, seed: int, _denom_shift: int = 0) -> SievePath:
    """Sample a path on [2, n] by the round-based deletion sieve."""
    _check_window(n)
    members = np.zeros(n + 1, dtype=np.bool_)
    _rounds_kernel(U64(seed), n, members, _denom_shift)
    return SievePath(window_max=n, members=members, seed=seed, sampler="rounds")


def sample_path(n: int, seed: int, sampler: str = "conditional") -> SievePath:
    if sampler == "conditional":
        return sample_path_conditional(n, seed)
    if sampler == "rounds":
        return sample_path_rounds(n, seed)
    raise ValueError(f"unknown sampler {sampler!r}")


def iter_member_blocks(
    n: int, seed: int, block_size: int = 1 << 20
) -> Iterator[tuple[int, np.ndarray]]:
    """Stream the conditional-sampler membership bitmap in blocks.

    Yields (start_m, bool_block) pairs covering [2, n] in order without ever
    holding the whole window, for counting pipelines at very large n.  The
    blocks concatenate to exactly ``sample_path_conditional(n, seed).members[2:]``.
    """
    _check_window(n)
    if block_size < 1:
        raise ValueError("block size must be >= 1")
    y = 1.0
    start = 2
    while start <= n:
        end = min(start + block_size - 1, n)
        out = np.zeros(end - start + 1, dtype=np.bool_)
        y = _conditional_block(U64(seed), start, end, y, out)
        yield start, out
        start = end + 1


def survival_weight(path: SievePath, m: int, exact: bool = False) -> float | Fraction:
    """y_m for 2 <= m <= window_max + 1: product of (1 - 1/j) over members j < m.

    Float mode reads the forward-accumulated weight array; exact mode
    multiplies Fractions over the stored members.
    """
    if not 2 <= m <= path.window_max + 1:
        raise ValueError(f"m must be in [2, {path.window_max + 1}], got {m}")
    if exact:
        w = Fraction(1)
        for j in range(2, m):
            if path.members[j]:
                w *= Fraction(j - 1, j)
        return w
    return float(path.weights()[m])
