"""Counting statistics of a sieve path.

All counters use the literal convention "starts m <= x" — the partner
offsets m + h may exceed x, so a counter refuses any x whose span would
reach past the window instead of silently truncating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sieve import SievePath


@dataclass(frozen=True)
class Pattern:
    """Exact gap pattern: offsets present, every interior offset absent.

    ``offsets`` is the strictly increasing tuple (0, i_1, ..., i_{l+1}); an
    integer m matches when m + i is a member for every offset i and m + h is
    a non-member for every other h in [0, span].
    """

    offsets: tuple[int, ...]

    def __post_init__(self):
        o = tuple(int(v) for v in self.offsets)
        object.__setattr__(self, "offsets", o)
        if len(o) < 2:
            raise ValueError("a pattern needs at least the offsets (0, span)")
        if o[0] != 0:
            raise ValueError("pattern offsets must start at 0")
        if any(b <= a for a, b in zip(o, o[1:])):
            raise ValueError("pattern offsets must be strictly increasing")

    @property
    def span(self) -> int:
        return self.offsets[-1]

    @property
    def interior(self) -> tuple[int, ...]:
        return self.offsets[1:-1]

    @property
    def interior_count(self) -> int:
        return len(self.offsets) - 2

    def label(self) -> str:
        return "pattern[" + ",".join(str(v) for v in self.offsets) + "]"


@dataclass(frozen=True)
class LooseTuple:
    """Offset set {0, k_1, ..., k_{l-1}} with interior integers unconstrained."""

    gaps: tuple[int, ...]

    def __post_init__(self):
        g = tuple(int(v) for v in self.gaps)
        object.__setattr__(self, "gaps", g)
        if any(v <= 0 for v in g):
            raise ValueError("gaps must be positive")
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("gaps must be strictly increasing")

    @property
    def span(self) -> int:
        return self.gaps[-1] if self.gaps else 0

    @property
    def size(self) -> int:
        """Number of required members per match (l for an l-tuple)."""
        return len(self.gaps) + 1

    def label(self) -> str:
        return "tuple[" + ",".join(str(v) for v in self.gaps) + "]"


def arithmetic_tuple(d: int, size: int) -> LooseTuple:
    """The l-tuple with gaps (d, 2d, ..., (l-1)d): an arithmetic progression."""
    if d < 1 or size < 2:
        raise ValueError("need d >= 1 and size >= 2")
    return LooseTuple(tuple(d * i for i in range(1, size)))


def _check_span(path: SievePath, x: int, span: int) -> None:
    if x < 2:
        raise ValueError(f"x must be >= 2, got {x}")
    if x + span > path.window_max:
        raise ValueError(
            f"x + span = {x + span} exceeds window [2, {path.window_max}]; "
            "membership beyond the window cannot be certified"
        )


def count_twin(path: SievePath, k: int, x: int) -> int:
    """Number of j <= x with both j and j + k members."""
    if k < 1:
        raise ValueError("gap k must be >= 1")
    _check_span(path, x, k)
    mem = path.members
    return int(np.count_nonzero(mem[2 : x + 1] & mem[2 + k : x + 1 + k]))


def count_tuple(path: SievePath, tup: LooseTuple, x: int) -> int:
    """Number of m <= x with m + g a member for every gap g (and m itself)."""
    _check_span(path, x, tup.span)
    mem = path.members
    hits = mem[2 : x + 1].copy()
    for g in tup.gaps:
        hits &= mem[2 + g : x + 1 + g]
    return int(np.count_nonzero(hits))


def count_exact_pattern(path: SievePath, pattern: Pattern, x: int) -> int:
    """Number of m <= x matching the exact pattern (absences enforced)."""
    _check_span(path, x, pattern.span)
    mem = path.members
    required = set(pattern.offsets)
    hits = np.ones(x - 1, dtype=np.bool_)
    for h in range(pattern.span + 1):
        window = mem[2 + h : x + 1 + h]
        if h in required:
            hits &= window
        else:
            hits &= ~window
    return int(np.count_nonzero(hits))


def prime_count(path: SievePath, x: int) -> int:
    """Number of members <= x (the counting-function diagnostic)."""
    if x < 2:
        raise ValueError(f"x must be >= 2, got {x}")
    if x > path.window_max:
        raise ValueError(f"x = {x} beyond window [2, {path.window_max}]")
    return int(np.count_nonzero(path.members[2 : x + 1]))


def weighted_twin_sum(path: SievePath, x: int) -> float:
    """Gap-2 twin counter with each hit m weighted by
    1 / (y_m - (1/(m+1)) (1 - 1/m) y_m^2), the reciprocal of its conditional
    occurrence factor.  Each term lies in [1/y_m, (6/5)/y_m].
    """
    _check_span(path, x, 2)
    mem = path.members
    hits = mem[2 : x + 1] & mem[4 : x + 3]
    m = np.flatnonzero(hits) + 2
    if m.size == 0:
        return 0.0
    y = path.weights()[m]
    denom = y - (1.0 / (m + 1)) * (1.0 - 1.0 / m) * y * y
    return float(np.sum(1.0 / denom))


@dataclass(frozen=True)
class TwinDecomposition:
    """Both sides of the identity: the k-difference twin count equals the sum
    of exact-pattern counts over all 2^(k-1) interior subsets."""

    k: int
    x: int
    twin_count: int
    pattern_total: int
    pattern_counts: dict[tuple[int, ...], int]

    @property
    def matches(self) -> bool:
        return self.twin_count == self.pattern_total


def interior_patterns(k: int) -> list[Pattern]:
    """All exact patterns with span k, one per subset of {1, ..., k-1}."""
    if k < 1:
        raise ValueError("span must be >= 1")
    patterns = []
    inner = list(range(1, k))
    for mask in range(1 << len(inner)):
        chosen = tuple(v for i, v in enumerate(inner) if mask >> i & 1)
        patterns.append(Pattern((0,) + chosen + (k,)))
    return patterns


def decompose_twin_identity(path: SievePath, k: int, x: int) -> TwinDecomposition:
    """Evaluate the twin counter and its exact-pattern decomposition."""
    twin = count_twin(path, k, x)
    counts: dict[tuple[int, ...], int] = {}
    total = 0
    for p in interior_patterns(k):
        c = count_exact_pattern(path, p, x)
        counts[p.offsets] = c
        total += c
    return TwinDecomposition(
        k=k, x=x, twin_count=twin, pattern_total=total, pattern_counts=counts
    )
