"""Exact finite-n expectations via triangular moment ladders.

Pure moments E(y_n^k) obey the one-step recursion

    E(y_{n+1}^k) = E(y_n^k) - (1 - (1 - 1/n)^k) E(y_n^{k+1}),

a direct consequence of the two-branch measure recursion (n joins the path
with probability y_n, multiplying the weight by 1 - 1/n).  One moment order
is consumed per step, so exact evaluation at n = N formally needs orders up
to k + (N - 2) at the seed n = 2, where every moment equals 1.

Running that full triangle in floating point is catastrophically unstable:
an error injected at order k descends to order 0 with weight bounded by
H^k, H = sum of 1/j over the remaining steps, while the signal decays only
like the moment ratio per order.  The implementation therefore carries an
adaptive band of orders chosen so that (top-of-band value) * H^band is
negligible; everything above the band is provably ignorable and truncated.
The first steps, where H still exceeds the per-order signal decay and
double precision would be marginal, run in gmpy2 multi-precision floats.
Band safety is re-checked against the computed values at every step, so a
too-shallow seed raises instead of corrupting silently; the public entry
points retry with a deeper seed.

Expectations of the pattern counters ride on the same machinery:

* E(T(N)) for an exact gap pattern is the sum over m of the start
  probability, a polynomial in y_{m+1} with rational coefficients (the
  chain-rule product expanded), contracted against the pure moments.
* E(T(N)^2) and mixed moments E(y^i T) need more than pure moments: a
  pattern spans k positions, so the counter is correlated with the last k
  membership decisions beyond what the weight carries.  The second-moment
  ladder tracks moments jointly with the trailing k-position membership
  window (2^k states), which makes it exact; collapsing the window would
  reproduce one-line recursions that hold only asymptotically.
* The weighted gap-2 twin counter adds reciprocal-weight increments
  1/(y (1 - c y)); their integrals against the window-conditioned moments
  are geometric series with ratio c y <= 1/(q-2), summed to a configurable
  order with a reported tail estimate (the only non-exact step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .counters import Pattern
from .measure import ResourceLimitError

EXACT_N_CAP = 64

_PREFIX_PREC = 320  # bits carried through the small-n multi-precision zone
_TINY = 1e-36  # band-top contribution threshold, relative to the order-0 scale


class LadderUnstableError(RuntimeError):
    """Internal: the carried order band was too shallow for the target n."""


def _gamma(n: int, q_total: int) -> float:
    """Safety-padded bound on the per-order descent amplification from step n:
    an error at order k reaches order 0 with weight <= (sum_{j>=n} 1/j)^k."""
    return 1.25 * math.log(max(q_total / n, 1.0 + 1e-9)) + 2.5 / n + 0.25


def _prefix_end(q_total: int) -> int:
    """First step where double precision is safe: the per-order signal decay
    (about 1/M_n) must beat the per-order descent amplification."""
    n = 24
    h = 1.0 + sum(1.0 / j for j in range(1, n - 1))
    while n < q_total and h < _gamma(n, q_total) + 0.6:
        h += 1.0 / (n - 1)
        n += 1
    return min(max(n + 8, 48), q_total)


def _safe_band(peek, scale: float, gamma: float, floor_: int, top: int) -> int:
    """Smallest band >= floor_ whose first discarded order contributes less
    than _TINY * scale after worst-case descent.  ``peek(k)`` returns the
    magnitude at order k; raises when even ``top`` is not deep enough."""
    k = floor_
    g = gamma ** k
    while k <= top:
        if peek(k) * g < _TINY * scale:
            return k
        k += 1
        g *= gamma
    raise LadderUnstableError(f"order band exhausted at top {top}")


# ---------------------------------------------------------------------------
# Pure moment table
# ---------------------------------------------------------------------------

@dataclass
class MomentTable:
    """E(y_n^k) for 2 <= n <= max_n, 0 <= k <= k_target."""

    max_n: int
    k_target: int
    mode: str
    rows: dict[int, object] = field(repr=False)

    def moment(self, n: int, k: int):
        if not 2 <= n <= self.max_n:
            raise ValueError(f"n = {n} outside table range [2, {self.max_n}]")
        if not 0 <= k <= self.k_target:
            raise ValueError(f"order k = {k} outside [0, {self.k_target}]")
        return self.rows[n][k]

    def column(self, k: int) -> np.ndarray:
        """Float array v with v[i] = E(y_{i+2}^k), i = 0..max_n-2."""
        return np.array([float(self.rows[n][k]) for n in range(2, self.max_n + 1)])


def _build_exact_table(n_max: int, k_target: int) -> MomentTable:
    cur = [Fraction(1)] * (k_target + (n_max - 2) + 1)
    rows: dict[int, object] = {2: tuple(cur[: k_target + 1])}
    for n in range(2, n_max):
        b = Fraction(n - 1, n)
        bp = Fraction(1)
        nxt = []
        for k in range(len(cur) - 1):
            nxt.append(cur[k] - (1 - bp) * cur[k + 1])
            bp *= b
        cur = nxt
        rows[n + 1] = tuple(cur[: k_target + 1])
    return MomentTable(max_n=n_max, k_target=k_target, mode="exact", rows=rows)


def _build_float_table(n_max: int, k_target: int, seed_depth: int) -> MomentTable:
    floor_ = k_target + 4
    q1 = _prefix_end(n_max)
    full = k_target + n_max - 2
    rows: dict[int, object] = {}
    with gmpy2.context(precision=_PREFIX_PREC):
        cur = [mpfr(1)] * (min(seed_depth, full) + 1)
        rows[2] = np.array([float(v) for v in cur[: k_target + 1]])
        n = 2
        while n < min(q1, n_max):
            need = full - (n - 1)
            new_top = min(len(cur) - 2, need)
            if new_top < need:
                gam = _gamma(n, n_max)
                band = _safe_band(lambda k: abs(float(cur[k])), 1.0, gam,
                                  floor_, len(cur) - 1)
                new_top = min(new_top, max(band, floor_))
            b = 1 - mpfr(1) / n
            pw = mpfr(1)
            new = []
            for k in range(new_top + 1):
                new.append(cur[k] - (1 - pw) * cur[k + 1])
                pw *= b
            cur = new
            n += 1
            rows[n] = np.array([float(v) for v in cur[: k_target + 1]])
        arr = np.array([float(v) for v in cur])
    while n < n_max:
        need = full - (n - 1)
        new_top = min(arr.size - 2, need)
        if new_top < need:
            gam = _gamma(n, n_max)
            band = _safe_band(lambda k: abs(arr[k]), 1.0, gam, floor_,
                              arr.size - 1)
            new_top = min(new_top, max(band, floor_))
        b = 1.0 - 1.0 / n
        pw = np.empty(new_top + 1)
        pw[0] = 1.0
        if new_top:
            np.cumprod(np.full(new_top, b), out=pw[1:])
        arr = arr[: new_top + 1] - (1.0 - pw) * arr[1 : new_top + 2]
        n += 1
        rows[n] = arr[: k_target + 1].copy()
    return MomentTable(max_n=n_max, k_target=k_target, mode="float", rows=rows)


def build_moment_table(
    n_max: int, k_target: int, mode: str = "float", exact_cap: int = EXACT_N_CAP
) -> MomentTable:
    """Run the pure-moment triangle down from the all-ones seed at n = 2."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    if k_target < 1:
        raise ValueError("k_target must be >= 1")
    if mode == "exact":
        if n_max > exact_cap:
            raise ResourceLimitError(
                f"exact moment table capped at n = {exact_cap} (requested {n_max})"
            )
        return _build_exact_table(n_max, k_target)
    if mode != "float":
        raise ValueError(f"unknown mode {mode!r}")
    full = k_target + n_max - 2
    seed_depth = min(192, full)
    while True:
        try:
            return _build_float_table(n_max, k_target, seed_depth)
        except LadderUnstableError:
            if seed_depth >= full:
                raise
            seed_depth = min(seed_depth * 2, full)


# ---------------------------------------------------------------------------
# First moments of the counters (pure-moment contractions)
# ---------------------------------------------------------------------------

def expected_That(n: int, table: MomentTable, start: int = 3):
    """E of the weighted gap-2 twin counter restricted to starts >= ``start``:
    sum_{m=start}^{n} (1 - 1/m) E(y_m).

    The default start = 3 matches the summed one-step recursion; the full
    counter (starts at m = 2) adds the constant (6/5) E(y_4) = 1/2 exactly.
    """
    if n > table.max_n:
        raise ValueError("table too short for requested n")
    one = Fraction(1) if table.mode == "exact" else 1.0
    total = one - one
    for m in range(start, n + 1):
        total += (one - one / m) * table.moment(m, 1)
    return total


def weighted_twin_start_term(table: MomentTable):
    """Exact mean of the m = 2 term of the weighted twin counter: (6/5) E(y_4)."""
    one = Fraction(1) if table.mode == "exact" else 1.0
    return (one * 6 / 5) * table.moment(4, 1)


def pattern_start_poly(m: int, pattern: Pattern, exact: bool = True) -> list:
    """Coefficients c_d of P_m(y) = P(m + 1 starts the pattern | y_{m+1} = y).

    The chain-rule product expands to a polynomial of degree span + 1 whose
    lowest power is the number of required offsets (interior count + 2).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    one = Fraction(1) if exact else 1.0
    offs = pattern.offsets
    l = pattern.interior_count
    factors = [one - one / (m + 1 + i) for i in offs]
    const = one
    for j in range(l + 1):
        const *= factors[j] ** (l + 1 - j)
    poly = [one]
    run = one
    for j in range(l + 1):
        run *= factors[j]
        for _ in range(offs[j + 1] - offs[j] - 1):
            nxt = poly + [one - one]
            for d in range(len(poly)):
                nxt[d + 1] -= run * poly[d]
            poly = nxt
    zero = one - one
    return [zero] * (l + 2) + [const * c for c in poly]


def expected_T(n: int, pattern: Pattern, table: MomentTable):
    """E(T(n)) for an exact pattern: starts m <= n, each contributing the
    expanded start polynomial contracted against the moment table."""
    return expected_T_curve([n], pattern, table)[0]


def expected_T_curve(ns, pattern: Pattern, table: MomentTable) -> list:
    """E(T(n)) at each n of the sorted grid ``ns``, in one accumulation."""
    ns = sorted(int(v) for v in ns)
    if not ns or ns[0] < 2:
        raise ValueError("grid values must be >= 2")
    if ns[-1] > table.max_n:
        raise ValueError("table too short for requested grid")
    if table.k_target < pattern.span + 1:
        raise ValueError(
            f"table order {table.k_target} < span + 1 = {pattern.span + 1}"
        )
    exact = table.mode == "exact"
    one = Fraction(1) if exact else 1.0
    total = one - one
    out = []
    grid = iter(ns)
    nxt = next(grid)
    while nxt == 2:
        out.append(total)
        nxt = next(grid, None)
        if nxt is None:
            return out
    for m in range(1, ns[-1]):
        poly = pattern_start_poly(m, pattern, exact=exact)
        row = table.rows[m + 1]
        for d in range(pattern.interior_count + 2, len(poly)):
            total += poly[d] * row[d]
        while m + 1 == nxt:
            out.append(total)
            nxt = next(grid, None)
            if nxt is None:
                return out
    return out


def expected_member_count(n: int, table: MomentTable):
    """E(number of members <= n) = sum_{m=2}^{n} E(y_m)."""
    if n > table.max_n:
        raise ValueError("table too short for requested n")
    one = Fraction(1) if table.mode == "exact" else 1.0
    total = one - one
    for m in range(2, n + 1):
        total += table.moment(m, 1)
    return total


# ---------------------------------------------------------------------------
# Window-conditioned ladder for exact pattern counters (T, T^2, mixed)
# ---------------------------------------------------------------------------

@dataclass
class PatternMoments:
    """Window-ladder output: per-checkpoint E(T(n)) and E(T(n)^2), plus
    mixed moments E(y_{N+1}^i T(N)) for the requested orders i."""

    pattern: Pattern
    first: dict[int, object]
    second: dict[int, object]
    mixed: dict[int, object]

    def variance(self, n: int):
        return self.second[n] - self.first[n] ** 2


def _dp_band(a_cur, b_cur, c_cur, nstates, top, gamma, floor_, a_off=0):
    """Common safe band for the three families (orders counted from 0; the
    A family may store order d at index d + a_off)."""

    def peek_family(fam, off):
        def peek(k):
            return sum(abs(float(fam[s][k + off])) for s in range(nstates))
        return peek

    band = _safe_band(peek_family(a_cur, a_off), 1.0, gamma, floor_, top)
    for fam in (b_cur, c_cur):
        scale = max(sum(abs(float(fam[s][0])) for s in range(nstates)), 1.0)
        band = max(band, _safe_band(peek_family(fam, 0), scale, gamma,
                                    floor_, top))
    return band


def pattern_window_ladder(
    n_max: int,
    pattern: Pattern,
    mode: str = "float",
    checkpoints=None,
    mixed_orders=(),
    exact_cap: int = 20,
) -> PatternMoments:
    """Exact E(T), E(T^2) and E(y^i T) via moments conditioned on the trailing
    span-wide membership window.

    States are the 2^span membership patterns of the last span positions; a
    start at q - span completes when position q is included and the window
    equals the pattern's required signature.  One moment order is consumed
    per step, exactly as in the pure triangle, and the same adaptive order
    band keeps the float mode stable.
    """
    k = pattern.span
    if checkpoints is None:
        checkpoints = [n_max]
    checkpoints = sorted(set(int(v) for v in checkpoints))
    if not checkpoints or checkpoints[0] < 2 or checkpoints[-1] > n_max:
        raise ValueError("checkpoints must lie in [2, n_max]")
    mixed_orders = tuple(sorted(set(int(i) for i in mixed_orders)))
    if mixed_orders and mixed_orders[0] < 0:
        raise ValueError("mixed orders must be >= 0")
    if mode == "exact" and n_max > exact_cap:
        raise ResourceLimitError(
            f"exact window ladder capped at n = {exact_cap} (requested {n_max})"
        )
    if mode not in ("exact", "float"):
        raise ValueError(f"unknown mode {mode!r}")

    q_total = n_max + k
    full = q_total - 1 + (mixed_orders[-1] if mixed_orders else 0)
    if mode == "exact":
        return _pattern_dp(n_max, pattern, checkpoints, mixed_orders, full, True)
    seed_depth = min(192, full)
    while True:
        try:
            return _pattern_dp(
                n_max, pattern, checkpoints, mixed_orders, seed_depth, False
            )
        except LadderUnstableError:
            if seed_depth >= full:
                raise
            seed_depth = min(seed_depth * 2, full)


def _pattern_dp(n_max, pattern, checkpoints, mixed_orders, seed_depth, exact):
    k = pattern.span
    nstates = 1 << k
    sig = 0
    for h in pattern.offsets[:-1]:
        sig |= 1 << h
    imax = mixed_orders[-1] if mixed_orders else 0
    floor_ = imax + 6
    q_total = n_max + k
    q1 = q_total if exact else _prefix_end(q_total)

    one = Fraction(1) if exact else mpfr(1)
    zero = one - one

    def fresh(length):
        return [[zero] * length for _ in range(nstates)]

    ctx = gmpy2.context(precision=_PREFIX_PREC)
    with ctx:
        top = seed_depth
        a_cur = fresh(top + 1)
        a_cur[0] = [one] * (top + 1)
        b_cur = fresh(top + 1)
        c_cur = fresh(top + 1)

        first: dict[int, object] = {}
        second: dict[int, object] = {}
        checkset = set(checkpoints)
        np_phase = False

        for q in range(2, q_total + 1):
            full_need = (q_total - q) + imax
            new_top = min(top - 1, full_need)
            if not exact and new_top < full_need:
                gam = _gamma(q, q_total)
                band = _dp_band(a_cur, b_cur, c_cur, nstates, top, gam, floor_)
                new_top = min(new_top, max(band, floor_))
            hit_gate = q - k >= 2
            if not np_phase:
                beta = one - one / q
                pw = [one]
                for _ in range(new_top):
                    pw.append(pw[-1] * beta)
                a_new, b_new, c_new = (
                    fresh(new_top + 1),
                    fresh(new_top + 1),
                    fresh(new_top + 1),
                )
                for s in range(nstates):
                    s_inc = (s >> 1) | (1 << (k - 1))
                    s_exc = s >> 1
                    a, b, c = a_cur[s], b_cur[s], c_cur[s]
                    hit = hit_gate and s == sig
                    ai, bi, ci = a_new[s_inc], b_new[s_inc], c_new[s_inc]
                    ax, bx, cx = a_new[s_exc], b_new[s_exc], c_new[s_exc]
                    for d in range(new_top + 1):
                        ai[d] += pw[d] * a[d + 1]
                        if hit:
                            bi[d] += pw[d] * (b[d + 1] + a[d + 1])
                            ci[d] += pw[d] * (c[d + 1] + 2 * b[d + 1] + a[d + 1])
                        else:
                            bi[d] += pw[d] * b[d + 1]
                            ci[d] += pw[d] * c[d + 1]
                        ax[d] += a[d] - a[d + 1]
                        bx[d] += b[d] - b[d + 1]
                        cx[d] += c[d] - c[d + 1]
                a_cur, b_cur, c_cur = a_new, b_new, c_new
            else:
                beta = 1.0 - 1.0 / q
                pw = np.empty(new_top + 1)
                pw[0] = 1.0
                if new_top:
                    np.cumprod(np.full(new_top, beta), out=pw[1:])
                a_new = np.zeros((nstates, new_top + 1))
                b_new = np.zeros_like(a_new)
                c_new = np.zeros_like(a_new)
                m = new_top + 1
                for s in range(nstates):
                    s_inc = (s >> 1) | (1 << (k - 1))
                    s_exc = s >> 1
                    a, b, c = a_cur[s], b_cur[s], c_cur[s]
                    hit = hit_gate and s == sig
                    hi = a[1 : m + 1]
                    a_new[s_inc] += pw * hi
                    if hit:
                        b_new[s_inc] += pw * (b[1 : m + 1] + hi)
                        c_new[s_inc] += pw * (c[1 : m + 1] + 2 * b[1 : m + 1] + hi)
                    else:
                        b_new[s_inc] += pw * b[1 : m + 1]
                        c_new[s_inc] += pw * c[1 : m + 1]
                    a_new[s_exc] += a[:m] - hi
                    b_new[s_exc] += b[:m] - b[1 : m + 1]
                    c_new[s_exc] += c[:m] - c[1 : m + 1]
                a_cur, b_cur, c_cur = a_new, b_new, c_new
            top = new_top
            if not np_phase and not exact and q + 1 > q1:
                a_cur = np.array([[float(v) for v in row] for row in a_cur])
                b_cur = np.array([[float(v) for v in row] for row in b_cur])
                c_cur = np.array([[float(v) for v in row] for row in c_cur])
                np_phase = True
            n_done = q - k
            if n_done in checkset:
                fv = sum(b_cur[s][0] for s in range(nstates))
                sv = sum(c_cur[s][0] for s in range(nstates))
                if exact:
                    first[n_done], second[n_done] = fv, sv
                else:
                    first[n_done], second[n_done] = float(fv), float(sv)

        mixed: dict[int, object] = {}
        for i in mixed_orders:
            total = zero if exact else 0.0
            for s in range(nstates):
                rho = one if exact else 1.0
                for t in range(k):
                    if s >> t & 1:
                        rho *= (one if exact else 1.0) - (
                            one if exact else 1.0
                        ) / (n_max + 1 + t)
                total += b_cur[s][i] / rho**i
            mixed[i] = total if exact else float(total)
    return PatternMoments(pattern=pattern, first=first, second=second, mixed=mixed)


def expected_T_second(
    n: int, pattern: Pattern, mode: str = "float", checkpoints=None
):
    """E(T(n)^2), exact via the window ladder (checkpoints return a list)."""
    res = pattern_window_ladder(n, pattern, mode=mode, checkpoints=checkpoints)
    if checkpoints is None:
        return res.second[n]
    return [res.second[v] for v in sorted(set(int(x) for x in checkpoints))]


def expected_yT(n: int, pattern: Pattern, order: int | None = None, mode: str = "float"):
    """Mixed moment E(y_{n+1}^i T(n)); default order i = interior count + 2."""
    i = pattern.interior_count + 2 if order is None else int(order)
    res = pattern_window_ladder(n, pattern, mode=mode, mixed_orders=(i,))
    return res.mixed[i]


# ---------------------------------------------------------------------------
# Window-conditioned ladder for the weighted gap-2 twin counter
# ---------------------------------------------------------------------------

@dataclass
class WeightedTwinMoments:
    """Per-checkpoint first and second moments of the weighted twin counter,
    with the accumulated geometric-series truncation estimate."""

    start: int
    first: dict[int, object]
    second: dict[int, object]
    tail_bound: float

    def variance(self, n: int):
        return self.second[n] - self.first[n] ** 2


def weighted_twin_window_ladder(
    n_max: int,
    mode: str = "float",
    start: int = 3,
    checkpoints=None,
    series_order: int = 48,
    exact_cap: int = 20,
) -> WeightedTwinMoments:
    """Moments of the weighted twin counter with starts in [start, n].

    Same construction as the pattern ladder (span 2; the interior position
    unconstrained), except that a start q-2 completing at q adds the
    reciprocal weight g = 1/(y' (1 - c y')), y' being the weight at the
    start, reconstructed from the current weight and the window bits.  The
    integrals of g and g^2 against the window moments are geometric series
    with ratio c y' <= 1/(q-2), summed to ``series_order`` terms with the
    dropped tails accumulated into ``tail_bound``.  Moment order -1 rides
    along in the triangle (seeded by E(1/y_2) = 1) for the 1/y part; its
    exact running sum E(1/y_n) = M_n doubles as an internal cross-check.
    """
    if checkpoints is None:
        checkpoints = [n_max]
    checkpoints = sorted(set(int(v) for v in checkpoints))
    if not checkpoints or checkpoints[0] < 2 or checkpoints[-1] > n_max:
        raise ValueError("checkpoints must lie in [2, n_max]")
    if start < 2:
        raise ValueError("start must be >= 2")
    if series_order < 8:
        raise ValueError("series_order must be >= 8")
    if mode == "exact" and n_max > exact_cap:
        raise ResourceLimitError(
            f"exact weighted ladder capped at n = {exact_cap} (requested {n_max})"
        )
    if mode not in ("exact", "float"):
        raise ValueError(f"unknown mode {mode!r}")
    full = n_max + 1
    if mode == "exact":
        return _weighted_dp(n_max, start, checkpoints, series_order, full, True)
    seed_depth = min(192, full)
    while True:
        try:
            return _weighted_dp(
                n_max, start, checkpoints, series_order, seed_depth, False
            )
        except LadderUnstableError:
            if seed_depth >= full:
                raise
            seed_depth = min(seed_depth * 2, full)


def _wseries_lists(a, b, n_b, n_c, c_ratio, r, s_order, one):
    """List-arithmetic geometric integrals of the reciprocal start weight
    (A holds order d at index d + 1):

      g_vec[d]  = E[y^{d+1} g(y r) 1_s]   = sum_t c^t r^{t-1} A[d + t]
      gb_vec[d] = E[y^{d+1} S g(y r) 1_s] = sum_t c^t r^{t-1} B[d + t]
      g2_vec[d] = E[y^{d+1} g(y r)^2 1_s] = sum_t (t+1) c^t r^{t-2} A[d-1+t]
    """
    zero = one - one
    g_vec = [zero] * n_b
    gb_vec = [zero] * n_c
    g2_vec = [zero] * n_c
    kappa = one / r
    cr = c_ratio * r
    for t in range(s_order + 1):
        k2 = kappa * (t + 1) / r
        for d in range(n_b):
            g_vec[d] += kappa * a[d + t + 1]
        for d in range(n_c):
            gb_vec[d] += kappa * b[d + t]
            g2_vec[d] += k2 * a[d + t]
        kappa *= cr
    fcr = float(cr)
    geo = fcr ** (s_order + 1) / (1.0 - fcr)
    amax = float(a[0])
    bmax = float(b[0])
    fr = float(r)
    tail = geo * (amax + bmax) / fr + geo * (s_order + 2) / (1.0 - fcr) * amax / (
        fr * fr
    )
    return g_vec, gb_vec, g2_vec, tail


def _wseries_numpy(a, b, n_b, n_c, c_ratio, r, s_order):
    g_vec = np.zeros(n_b)
    gb_vec = np.zeros(n_c)
    g2_vec = np.zeros(n_c)
    kappa = 1.0 / r
    cr = c_ratio * r
    t_used = s_order + 1
    for t in range(s_order + 1):
        g_vec += kappa * a[t + 1 : t + 1 + n_b]
        gb_vec += kappa * b[t : t + n_c]
        g2_vec += (kappa * (t + 1) / r) * a[t : t + n_c]
        kappa *= cr
        if kappa * a[0] < 1e-22:
            t_used = t + 1
            break
    geo = cr**t_used / (1.0 - cr)
    tail = geo * (a[0] + b[0]) / r + geo * (t_used + 2) / (1.0 - cr) * a[0] / (r * r)
    return g_vec, gb_vec, g2_vec, tail


def _weighted_dp(n_max, start, checkpoints, s_order, seed_depth, exact):
    k = 2
    nstates = 4
    floor_ = 6
    q_total = n_max + k
    q1 = q_total if exact else _prefix_end(q_total)

    one = Fraction(1) if exact else mpfr(1)
    zero = one - one

    def fresh(length):
        return [[zero] * length for _ in range(nstates)]

    ctx = gmpy2.context(precision=_PREFIX_PREC)
    with ctx:
        top = seed_depth  # C carries orders 0..top
        a_cur = fresh(top + 2 * s_order + 2)  # orders -1..top+2*s_order
        a_cur[0] = [one] * len(a_cur[0])
        b_cur = fresh(top + s_order + 1)  # orders 0..top+s_order
        c_cur = fresh(top + 1)

        first: dict[int, object] = {}
        second: dict[int, object] = {}
        checkset = set(checkpoints)
        tail_bound = 0.0
        np_phase = False

        for q in range(2, q_total + 1):
            full_need = q_total - q
            new_top = min(top - 1, full_need)
            if not exact and new_top < full_need:
                gam = _gamma(q, q_total)
                band = _dp_band(
                    a_cur, b_cur, c_cur, nstates, top, gam, floor_, a_off=1
                )
                new_top = min(new_top, max(band, floor_))
            n_a = new_top + 2 * s_order + 1  # A update count: orders -1..n_a-2
            n_b = new_top + s_order + 1
            n_c = new_top + 1
            hit_gate = q - 2 >= start
            c_ratio = None
            if hit_gate:
                c_ratio = (1.0 / (q - 1)) * (1.0 - 1.0 / (q - 2))
            if not np_phase:
                beta = one - one / q
                pw = [one / beta]  # pw[i] = beta^(i-1)
                for _ in range(n_a - 1):
                    pw.append(pw[-1] * beta)
                a_new = fresh(n_a + 1)
                b_new = fresh(n_b)
                c_new = fresh(n_c)
                for s in range(nstates):
                    s_inc = (s >> 1) | 2
                    s_exc = s >> 1
                    a, b, c = a_cur[s], b_cur[s], c_cur[s]
                    hit = hit_gate and (s & 1) == 1
                    if hit:
                        r = one / (one - one / (q - 2))
                        if s >> 1 & 1:
                            r /= one - one / (q - 1)
                        cr = (one / (q - 1)) * (one - one / (q - 2))
                        g_vec, gb_vec, g2_vec, t_add = _wseries_lists(
                            a, b, n_b, n_c, cr, r, s_order, one
                        )
                        tail_bound += t_add * 2 * (q_total - q + 1)
                    ai, bi, ci = a_new[s_inc], b_new[s_inc], c_new[s_inc]
                    ax, bx, cx = a_new[s_exc], b_new[s_exc], c_new[s_exc]
                    for i in range(n_a + 1):
                        ai[i] += pw[i] * a[i + 1]
                        ax[i] += a[i] - a[i + 1]
                    for d in range(n_b):
                        inc = b[d + 1] + g_vec[d] if hit else b[d + 1]
                        bi[d] += pw[d + 1] * inc
                        bx[d] += b[d] - b[d + 1]
                    for d in range(n_c):
                        inc = (
                            c[d + 1] + 2 * gb_vec[d] + g2_vec[d] if hit else c[d + 1]
                        )
                        ci[d] += pw[d + 1] * inc
                        cx[d] += c[d] - c[d + 1]
                a_cur, b_cur, c_cur = a_new, b_new, c_new
            else:
                beta = 1.0 - 1.0 / q
                pw = np.empty(n_a + 1)
                pw[0] = 1.0 / beta
                np.cumprod(np.full(n_a, beta), out=pw[1:])
                a_new = np.zeros((nstates, n_a + 1))
                b_new = np.zeros((nstates, n_b))
                c_new = np.zeros((nstates, n_c))
                for s in range(nstates):
                    s_inc = (s >> 1) | 2
                    s_exc = s >> 1
                    a, b, c = a_cur[s], b_cur[s], c_cur[s]
                    hit = hit_gate and (s & 1) == 1
                    if hit:
                        r = 1.0 / (1.0 - 1.0 / (q - 2))
                        if s >> 1 & 1:
                            r /= 1.0 - 1.0 / (q - 1)
                        g_vec, gb_vec, g2_vec, t_add = _wseries_numpy(
                            a, b, n_b, n_c, c_ratio, r, s_order
                        )
                        tail_bound += t_add * 2 * (q_total - q + 1)
                    a_new[s_inc] += pw * a[1 : n_a + 2]
                    a_new[s_exc] += a[: n_a + 1] - a[1 : n_a + 2]
                    pw_b = pw[1 : n_b + 1]
                    hib = b[1 : n_b + 1]
                    if hit:
                        b_new[s_inc] += pw_b * (hib + g_vec)
                    else:
                        b_new[s_inc] += pw_b * hib
                    b_new[s_exc] += b[:n_b] - hib
                    pw_c = pw[1 : n_c + 1]
                    hic = c[1 : n_c + 1]
                    if hit:
                        c_new[s_inc] += pw_c * (hic + 2 * gb_vec + g2_vec)
                    else:
                        c_new[s_inc] += pw_c * hic
                    c_new[s_exc] += c[:n_c] - hic
                a_cur, b_cur, c_cur = a_new, b_new, c_new
            top = new_top
            if not np_phase and not exact and q + 1 > q1:
                a_cur = np.array([[float(v) for v in row] for row in a_cur])
                b_cur = np.array([[float(v) for v in row] for row in b_cur])
                c_cur = np.array([[float(v) for v in row] for row in c_cur])
                np_phase = True
            n_done = q - k
            if n_done in checkset:
                fv = sum(b_cur[s][0] for s in range(nstates))
                sv = sum(c_cur[s][0] for s in range(nstates))
                if exact:
                    first[n_done], second[n_done] = fv, sv
                else:
                    first[n_done], second[n_done] = float(fv), float(sv)
    return WeightedTwinMoments(
        start=start, first=first, second=second, tail_bound=float(tail_bound)
    )


def expected_That_second(
    n: int, mode: str = "float", start: int = 3, series_order: int = 48
):
    """E of the squared weighted twin counter (starts >= ``start``)."""
    res = weighted_twin_window_ladder(
        n, mode=mode, start=start, series_order=series_order
    )
    return res.second[n]
