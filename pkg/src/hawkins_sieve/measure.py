"""Exact rational measure of the random sieve on elementary sets.

An elementary set {a_1,...,a_k; n} is the event that the path's elements
below the cutoff n are exactly {a_1,...,a_k}.  Its measure follows the
two-branch recursion: moving the cutoff from n to n+1 splits each set by
membership of n, with inclusion probability q = prod (1 - 1/a_i) over the
present elements.  Everything here is arbitrary-precision rational — this
module is the ground truth the samplers, ladders and predictors are tested
against.

Enumeration of a full level costs 2^(n-2) entries, so levels are capped
(default 18) behind a ResourceLimitError.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .counters import Pattern

DEFAULT_LEVEL_CAP = 18


class ResourceLimitError(RuntimeError):
    """Raised when an exact computation would exceed its configured cap."""


@dataclass(frozen=True)
class ElementarySet:
    """The event 'elements below ``cutoff`` are exactly ``elements``'."""

    elements: tuple[int, ...]
    cutoff: int

    def __post_init__(self):
        elems = tuple(int(a) for a in self.elements)
        object.__setattr__(self, "elements", elems)
        if self.cutoff < 2:
            raise ValueError("cutoff must be >= 2")
        if any(a < 2 for a in elems):
            raise ValueError("elements must be >= 2")
        if any(b <= a for a, b in zip(elems, elems[1:])):
            raise ValueError("elements must be strictly increasing")
        if elems and elems[-1] >= self.cutoff:
            raise ValueError("cutoff must exceed the largest element")

    def survival_weight(self) -> Fraction:
        """y_cutoff on this set: prod of (1 - 1/a) over the elements."""
        w = Fraction(1)
        for a in self.elements:
            w *= Fraction(a - 1, a)
        return w


def _mask_weight(mask: int) -> Fraction:
    w = Fraction(1)
    a = 2
    while mask:
        if mask & 1:
            w *= Fraction(a - 1, a)
        mask >>= 1
        a += 1
    return w


@dataclass
class MeasureTable:
    """Complete measure table at one cutoff.

    Subsets of [2, cutoff) are keyed by bitmask (bit i = integer i + 2).
    ``mu[mask]`` is the exact measure, ``weight[mask]`` the survival weight
    y_cutoff = prod (1 - 1/a) over the subset.
    """

    cutoff: int
    mu: dict[int, Fraction]
    weight: dict[int, Fraction]

    @staticmethod
    def mask_of(elements: Iterable[int]) -> int:
        mask = 0
        for a in elements:
            mask |= 1 << (a - 2)
        return mask

    @staticmethod
    def elements_of(mask: int) -> tuple[int, ...]:
        out = []
        a = 2
        while mask:
            if mask & 1:
                out.append(a)
            mask >>= 1
            a += 1
        return tuple(out)

    def measure(self, elements: Iterable[int]) -> Fraction:
        return self.mu[self.mask_of(elements)]

    def total(self) -> Fraction:
        return sum(self.mu.values(), Fraction(0))

    def rows(self) -> list[tuple[tuple[int, ...], Fraction]]:
        return [(self.elements_of(m), v) for m, v in sorted(self.mu.items())]


@lru_cache(maxsize=8)
def enumerate_level(n: int, cap: int = DEFAULT_LEVEL_CAP) -> MeasureTable:
    """Build the full table of all 2^(n-2) elementary sets at cutoff n."""
    if n < 2:
        raise ValueError("cutoff must be >= 2")
    if n > cap:
        raise ResourceLimitError(
            f"level {n} needs 2^{n - 2} entries; raise the cap ({cap}) explicitly"
        )
    mu = {0: Fraction(1)}
    weight = {0: Fraction(1)}
    for m in range(2, n):
        bit = 1 << (m - 2)
        keep = Fraction(m - 1, m)
        new_mu: dict[int, Fraction] = {}
        new_weight: dict[int, Fraction] = {}
        for mask, val in mu.items():
            q = weight[mask]
            new_mu[mask | bit] = val * q
            new_weight[mask | bit] = q * keep
            new_mu[mask] = val * (1 - q)
            new_weight[mask] = q
        mu, weight = new_mu, new_weight
    return MeasureTable(cutoff=n, mu=mu, weight=weight)


@lru_cache(maxsize=200_000)
def _mu_recursive(elements: tuple[int, ...], n: int) -> Fraction:
    if n == 2:
        return Fraction(1)
    prev = n - 1
    if elements and elements[-1] == prev:
        rest = elements[:-1]
        q = Fraction(1)
        for a in rest:
            q *= Fraction(a - 1, a)
        return q * _mu_recursive(rest, prev)
    q = Fraction(1)
    for a in elements:
        q *= Fraction(a - 1, a)
    return (1 - q) * _mu_recursive(elements, prev)


def mu(e: ElementarySet) -> Fraction:
    """Exact measure of an elementary set via the two-branch recursion."""
    return _mu_recursive(e.elements, e.cutoff)


def membership_prob(
    n: int,
    required: Iterable[int] = (),
    forbidden: Iterable[int] = (),
    cap: int = DEFAULT_LEVEL_CAP,
) -> Fraction:
    """Probability that every ``required`` integer is a member and every
    ``forbidden`` one is not, events read off the level-n table."""
    req = set(int(a) for a in required)
    forb = set(int(a) for a in forbidden)
    if req & forb:
        raise ValueError("required and forbidden sets overlap")
    for a in req | forb:
        if not 2 <= a < n:
            raise ValueError(f"constraint {a} outside [2, {n})")
    table = enumerate_level(n, cap)
    req_mask = MeasureTable.mask_of(req)
    forb_mask = MeasureTable.mask_of(forb)
    total = Fraction(0)
    for mask, val in table.mu.items():
        if mask & req_mask == req_mask and not mask & forb_mask:
            total += val
    return total


def exact_moment(n: int, k: int, cap: int = DEFAULT_LEVEL_CAP) -> Fraction:
    """E(y_n^k) by full enumeration of the level-n table."""
    if k < 0:
        raise ValueError("moment order must be >= 0")
    table = enumerate_level(n, cap)
    total = Fraction(0)
    for mask, val in table.mu.items():
        total += val * table.weight[mask] ** k
    return total


def _check_weight(y) -> None:
    if not 0 < y <= 1:
        raise ValueError(f"survival weight must be in (0, 1], got {y}")


def twin_conditional_prob(y, m: int):
    """P(m and m+2 both members | history below m with weight y):
    (1 - 1/m) (y^2 - (1/(m+1)) (1 - 1/m) y^3).

    Exact when y is a Fraction; keeps the input's arithmetic otherwise.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    _check_weight(y)
    one = Fraction(1) if isinstance(y, Fraction) else 1.0
    lead = one - one / m
    return lead * (y * y - (one / (m + 1)) * lead * y * y * y)


def pattern_conditional_prob(y, m: int, pattern: Pattern):
    """P(m+1 starts the exact pattern | history through m with y = y_{m+1}).

    Chain-rule product over the span: each required offset i_j contributes
    its inclusion probability (y times the survival factors of the offsets
    already included), each absent position the complementary factor.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    _check_weight(y)
    one = Fraction(1) if isinstance(y, Fraction) else 1.0
    offs = pattern.offsets
    prob = one
    included = one  # prod of (1 - 1/(m+1+i_h)) over offsets included so far
    for j, i_j in enumerate(offs):
        prob *= included * y
        included *= one - one / (m + 1 + i_j)
        if j < len(offs) - 1:
            gap = offs[j + 1] - i_j - 1
            if gap:
                prob *= (one - included * y) ** gap
    return prob


def pattern_prob_bruteforce(y, m: int, pattern: Pattern):
    """Same probability by enumerating all 2^(span+1) membership outcomes of
    positions m+1 .. m+1+span, applying the one-step conditional inclusion
    probability and weight update at each position."""
    if m < 1:
        raise ValueError("m must be >= 1")
    _check_weight(y)
    one = Fraction(1) if isinstance(y, Fraction) else 1.0
    span = pattern.span
    required = set(pattern.offsets)
    total = one - one  # zero of the right type
    # outcomes[h] = membership of position m+1+h
    for outcome in range(1 << (span + 1)):
        w = y
        prob = one
        for h in range(span + 1):
            pos = m + 1 + h
            if outcome >> h & 1:
                prob *= w
                w *= one - one / pos
            else:
                prob *= one - w
        if all(
            (outcome >> h & 1) == (h in required) for h in range(span + 1)
        ):
            total += prob
    return total


def dump_level_csv(table: MeasureTable) -> str:
    """CSV rows: subset (space-free comma join), numerator, denominator."""
    lines = ["subset,numerator,denominator"]
    for elements, val in table.rows():
        label = '"' + ",".join(str(a) for a in elements) + '"'
        lines.append(f"{label},{val.numerator},{val.denominator}")
    return "\n".join(lines) + "\n"
