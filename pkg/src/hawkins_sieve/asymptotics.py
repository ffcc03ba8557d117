"""Closed-form predictors and their residual checkers.

M_n = 1 + sum_{j=1}^{n-2} 1/j is the deterministic surrogate for 1/E(y_n)
(in fact E(1/y_n) = M_n exactly); every asymptotic formula here is a short
expansion in powers of 1/M_n with an explicit error scale.  The unspecified
O-constants are handled by "normalized residual within a recorded band"
tests: residual = (exact - predicted) / error_scale.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .counters import LooseTuple, Pattern

CACHE_ENV = "HAWKINS_CACHE_DIR"

_harmonic_cache: dict[int, float] = {}
_harmonic_array: np.ndarray = np.zeros(1)  # _harmonic_array[j] = H_j


def _extend_harmonic_array(j_max: int) -> np.ndarray:
    global _harmonic_array
    if j_max >= _harmonic_array.size:
        old = _harmonic_array
        js = np.arange(old.size, j_max + 1, dtype=np.float64)
        grown = np.concatenate([old, np.cumsum(1.0 / js) + old[-1]])
        _harmonic_array = grown
    return _harmonic_array


def harmonic_M_array(n_max: int) -> np.ndarray:
    """Float array v with v[i] = M_{i+2} for i = 0..n_max-2."""
    if n_max < 2:
        raise ValueError("n must be >= 2")
    h = _extend_harmonic_array(n_max - 2)
    return 1.0 + h[0 : n_max - 1]


def _cache_file() -> str | None:
    d = os.environ.get(CACHE_ENV)
    if not d:
        return None
    os.makedirs(d, exist_ok=True)
    return os.path.join(d, "harmonic_checkpoints.json")


def harmonic_M(n: int, exact: bool = False) -> float | Fraction:
    """M_n = 1 + sum_{j=1}^{n-2} 1/j (exact Fraction on request for small n)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if exact:
        if n > 100_000:
            raise ValueError("exact harmonic values are capped at n = 100000")
        return 1 + sum(Fraction(1, j) for j in range(1, n - 1))
    if n in _harmonic_cache:
        return _harmonic_cache[n]
    path = _cache_file()
    if path and os.path.exists(path):
        try:
            stored = json.load(open(path))
        except (OSError, json.JSONDecodeError):
            stored = {}
        if str(n) in stored:
            val = float(stored[str(n)])
            _harmonic_cache[n] = val
            return val
    if n - 2 < _harmonic_array.size or n <= 4_194_304:
        val = float(harmonic_M_array(n)[-1])
    else:
        # chunked compensated accumulation; O(n) once, then cached
        total = math.fsum(
            [1.0]
            + [
                float(np.sum(1.0 / np.arange(lo, min(lo + (1 << 22), n - 1))))
                for lo in range(1, n - 1, 1 << 22)
            ]
        )
        val = total
    _harmonic_cache[n] = val
    if path:
        try:
            stored = json.load(open(path)) if os.path.exists(path) else {}
        except (OSError, json.JSONDecodeError):
            stored = {}
        stored[str(n)] = val
        json.dump(stored, open(path, "w"), sort_keys=True)
    return val


@dataclass(frozen=True)
class ExpansionSpec:
    """Parameters of the power-sum expansion sum_{k=2}^n k^s / M_k^r,
    truncated at overall order t (error scale n^{s+1}/M_n^t)."""

    s: int
    r: int
    t: int

    def __post_init__(self):
        if self.s < 0 or self.r < 0:
            raise ValueError("s and r must be >= 0")
        if self.t < self.r:
            raise ValueError("need r <= t")


@dataclass(frozen=True)
class Prediction:
    """leading + correction with an explicit error scale."""

    statistic: str
    n: int
    leading: float
    correction: float
    error_scale: float

    @property
    def value(self) -> float:
        return self.leading + self.correction


def normalized_residual(exact_value, pred: Prediction) -> float:
    """(exact - predicted) / error_scale: the band-test statistic."""
    return (float(exact_value) - pred.value) / pred.error_scale


def coeff_c(j: int, r: int, s: int = 0) -> Fraction:
    """Expansion coefficient r (r+1) ... (r+j-1) / (s+1)^(j+1)."""
    if j < 1:
        raise ValueError("j must be >= 1")
    if r < 0 or s < 0:
        raise ValueError("r and s must be >= 0")
    num = 1
    for i in range(j):
        num *= r + i
    return Fraction(num, (s + 1) ** (j + 1))


def lemma1_sum_exact(spec: ExpansionSpec, n: int) -> float:
    """Direct evaluation of sum_{k=2}^{n} k^s / M_k^r."""
    if n < 2:
        raise ValueError("n must be >= 2")
    m = harmonic_M_array(n)
    k = np.arange(2, n + 1, dtype=np.float64)
    return float(np.sum(k**spec.s / m**spec.r))


def lemma1_sum_curve(spec: ExpansionSpec, ns) -> list[float]:
    """The same sum at each n of a sorted grid, via one cumulative pass."""
    ns = sorted(int(v) for v in ns)
    if not ns or ns[0] < 2:
        raise ValueError("grid values must be >= 2")
    m = harmonic_M_array(ns[-1])
    k = np.arange(2, ns[-1] + 1, dtype=np.float64)
    csum = np.cumsum(k**spec.s / m**spec.r)
    return [float(csum[v - 2]) for v in ns]


def lemma1_expansion(spec: ExpansionSpec, n: int) -> Prediction:
    """Expansion n^{s+1}/((s+1) M_n^r) + sum_j c(j,r) n^{s+1}/M_n^{r+j}
    with j <= t - r - 1 and error scale n^{s+1}/M_n^t."""
    if n < 2:
        raise ValueError("n must be >= 2")
    m = harmonic_M(n)
    s, r, t = spec.s, spec.r, spec.t
    lead = n ** (s + 1) / ((s + 1) * m**r)
    corr = 0.0
    for j in range(1, t - r):
        corr += float(coeff_c(j, r, s)) * n ** (s + 1) / m ** (r + j)
    return Prediction(
        statistic=f"powersum[s={s},r={r},t={t}]",
        n=n,
        leading=lead,
        correction=corr,
        error_scale=n ** (s + 1) / m**t,
    )


def predict_moment(n: int, k: int) -> Prediction:
    """E(y_n^k) ~ 1/M_n^k with error scale 1/M_n^(k+2) (Mertens analogue)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if k < 0:
        raise ValueError("k must be >= 0")
    m = harmonic_M(n)
    return Prediction(
        statistic=f"moment[k={k}]",
        n=n,
        leading=1.0 / m**k,
        correction=0.0,
        error_scale=1.0 / m ** (k + 2),
    )


def predict_That(n: int) -> Prediction:
    """Weighted twin counter mean: n/M_n + n/M_n^2, error scale n/M_n^3."""
    if n < 2:
        raise ValueError("n must be >= 2")
    m = harmonic_M(n)
    return Prediction(
        statistic="weighted_twin",
        n=n,
        leading=n / m,
        correction=n / m**2,
        error_scale=n / m**3,
    )


def predict_That_second(n: int) -> Prediction:
    """Second moment of the weighted twin counter: n^2/M^2 + 2 n^2/M^3."""
    if n < 2:
        raise ValueError("n must be >= 2")
    m = harmonic_M(n)
    return Prediction(
        statistic="weighted_twin_second",
        n=n,
        leading=n**2 / m**2,
        correction=2.0 * n**2 / m**3,
        error_scale=n**2 / m**4,
    )


def predict_T(n: int, pattern: Pattern) -> Prediction:
    """Exact-pattern counter mean: with l interior offsets and span k,
    n/M^{l+2} - (k-2l-3) n/M^{l+3}, error scale n/M^{l+4}."""
    if n < 2:
        raise ValueError("n must be >= 2")
    m = harmonic_M(n)
    l = pattern.interior_count
    k = pattern.span
    return Prediction(
        statistic=pattern.label(),
        n=n,
        leading=n / m ** (l + 2),
        correction=-(k - 2 * l - 3) * n / m ** (l + 3),
        error_scale=n / m ** (l + 4),
    )


def predict_T_second(n: int, pattern: Pattern) -> Prediction:
    """Exact-pattern counter second moment:
    n^2/M^{2l+4} - (2k-4l-6) n^2/M^{2l+5}, error scale n^2/M^{2l+6}."""
    if n < 2:
        raise ValueError("n must be >= 2")
    m = harmonic_M(n)
    l = pattern.interior_count
    k = pattern.span
    return Prediction(
        statistic=pattern.label() + "^2",
        n=n,
        leading=n**2 / m ** (2 * l + 4),
        correction=-(2 * k - 4 * l - 6) * n**2 / m ** (2 * l + 5),
        error_scale=n**2 / m ** (2 * l + 6),
    )


def predict_yT(n: int, pattern: Pattern) -> Prediction:
    """Mixed moment E(y_{n+1}^{l+2} T(n)):
    n/M^{2l+4} - (k-2l-3) n/M^{2l+5}, error scale n/M^{2l+6}."""
    if n < 2:
        raise ValueError("n must be >= 2")
    m = harmonic_M(n)
    l = pattern.interior_count
    k = pattern.span
    return Prediction(
        statistic="y^" + str(l + 2) + "*" + pattern.label(),
        n=n,
        leading=n / m ** (2 * l + 4),
        correction=-(k - 2 * l - 3) * n / m ** (2 * l + 5),
        error_scale=n / m ** (2 * l + 6),
    )


def predict_twin(n: int, k: int) -> Prediction:
    """Mean of the loose k-difference twin counter: the sum of predict_T over
    all 2^(k-1) exact patterns of span k (error scales added)."""
    from .counters import interior_patterns

    lead = corr = scale = 0.0
    for p in interior_patterns(k):
        pred = predict_T(n, p)
        if p.interior_count == 0:
            lead += pred.leading
        else:
            corr += pred.leading
        corr += pred.correction
        scale += pred.error_scale
    return Prediction(
        statistic=f"twin[k={k}]",
        n=n,
        leading=lead,
        correction=corr,
        error_scale=scale,
    )


def predict_tuple(n: int, tup: LooseTuple) -> Prediction:
    """Mean of a loose tuple counter: sum of predict_T over every exact
    pattern whose offsets contain {0} + gaps within the span."""
    from .counters import interior_patterns

    required = set(tup.gaps)
    lead = corr = scale = 0.0
    for p in interior_patterns(tup.span):
        if not required <= set(p.offsets):
            continue
        pred = predict_T(n, p)
        if set(p.offsets) == required | {0, tup.span}:
            lead += pred.leading
        else:
            corr += pred.leading
        corr += pred.correction
        scale += pred.error_scale
    return Prediction(
        statistic=tup.label(), n=n, leading=lead, correction=corr, error_scale=scale
    )


def predict_member_count(n: int) -> Prediction:
    """Mean member count (counting-function analogue): n/M + n/M^2."""
    if n < 2:
        raise ValueError("n must be >= 2")
    m = harmonic_M(n)
    return Prediction(
        statistic="member_count",
        n=n,
        leading=n / m,
        correction=n / m**2,
        error_scale=n / m**3,
    )


def limit_density(x: float, l: int) -> float:
    """The almost-sure limit density x / (log x)^l (natural log)."""
    if x <= 1:
        raise ValueError("x must be > 1")
    if l < 1:
        raise ValueError("l must be >= 1")
    return x / math.log(x) ** l


def prediction_csv(preds) -> str:
    lines = ["statistic,n,leading,correction,error_scale"]
    for p in preds:
        lines.append(
            f"{p.statistic},{p.n},{p.leading!r},{p.correction!r},{p.error_scale!r}"
        )
    return "\n".join(lines) + "\n"
