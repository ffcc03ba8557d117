"""Reproducible multi-path experiments.

Path i of a run draws its seed as split_seed(master_seed, i); per-path
statistic values are buffered by path index and reduced with exact
accumulation (math.fsum), so the report is byte-identical for any worker
count.  Workers are threads: path generation happens in numba kernels and
counting in numpy, both of which release the GIL.

The reference column prefers the exact ladder expectation when the window is
small enough to afford the O(N^2) triangle; otherwise it falls back to the
asymptotic prediction, whose printed error scale is added in quadrature to
the sampling stderr for the z-score.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import asymptotics, counters, moments
from .counters import LooseTuple, Pattern
from .rng import RNG_ALGORITHM, split_seed
from .sieve import SievePath, sample_path, sample_path_rounds

__version__ = "0.1.0"

ORACLE_N_CAP = 4096  # largest window for which run_experiment builds the exact ladder


@dataclass(frozen=True)
class StatisticSpec:
    """One counting statistic to evaluate at every checkpoint.

    kinds: twin (needs k), pattern (needs offsets), tuple (needs gaps),
    weighted_twin, member_count.
    """

    kind: str
    k: int | None = None
    offsets: tuple[int, ...] | None = None
    gaps: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind == "twin":
            if not self.k or self.k < 1:
                raise ValueError("twin statistic needs k >= 1")
        elif self.kind == "pattern":
            object.__setattr__(self, "offsets", Pattern(self.offsets).offsets)
        elif self.kind == "tuple":
            object.__setattr__(self, "gaps", LooseTuple(self.gaps).gaps)
        elif self.kind in ("weighted_twin", "member_count"):
            pass
        else:
            raise ValueError(f"unknown statistic kind {self.kind!r}")

    @property
    def span(self) -> int:
        if self.kind == "twin":
            return self.k
        if self.kind == "pattern":
            return self.offsets[-1]
        if self.kind == "tuple":
            return self.gaps[-1]
        if self.kind == "weighted_twin":
            return 2
        return 0

    @property
    def density_exponent(self) -> int:
        """Exponent l in the almost-sure law statistic ~ x/(log x)^l."""
        if self.kind == "twin":
            return 2
        if self.kind == "pattern":
            return len(self.offsets)
        if self.kind == "tuple":
            return len(self.gaps) + 1
        if self.kind == "weighted_twin":
            return 1
        return 1

    def label(self) -> str:
        if self.kind == "twin":
            return f"twin[k={self.k}]"
        if self.kind == "pattern":
            return Pattern(self.offsets).label()
        if self.kind == "tuple":
            return LooseTuple(self.gaps).label()
        return self.kind

    def evaluate(self, path: SievePath, x: int) -> float:
        if self.kind == "twin":
            return float(counters.count_twin(path, self.k, x))
        if self.kind == "pattern":
            return float(counters.count_exact_pattern(path, Pattern(self.offsets), x))
        if self.kind == "tuple":
            return float(counters.count_tuple(path, LooseTuple(self.gaps), x))
        if self.kind == "weighted_twin":
            return counters.weighted_twin_sum(path, x)
        return float(counters.prime_count(path, x))


def parse_statistic(text: str) -> StatisticSpec:
    """Parse 'twin:2', 'pattern:0,1,3', 'tuple:3,6', 'weighted_twin',
    'member_count'."""
    kind, _, arg = text.partition(":")
    kind = kind.strip()
    if kind == "twin":
        return StatisticSpec(kind="twin", k=int(arg))
    if kind == "pattern":
        return StatisticSpec(
            kind="pattern", offsets=tuple(int(v) for v in arg.split(","))
        )
    if kind == "tuple":
        return StatisticSpec(kind="tuple", gaps=tuple(int(v) for v in arg.split(",")))
    if kind in ("weighted_twin", "member_count"):
        return StatisticSpec(kind=kind)
    raise ValueError(f"cannot parse statistic {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    window_max: int
    paths: int
    master_seed: int
    statistics: tuple[StatisticSpec, ...]
    checkpoints: tuple[int, ...]
    sampler: str = "conditional"
    workers: int = 1
    oracle_n_cap: int = ORACLE_N_CAP

    def __post_init__(self):
        if self.window_max < 2:
            raise ValueError("window_max must be >= 2")
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.sampler not in ("conditional", "rounds"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        cps = tuple(int(v) for v in self.checkpoints)
        object.__setattr__(self, "checkpoints", cps)
        if not cps or list(cps) != sorted(set(cps)):
            raise ValueError("checkpoints must be a nonempty increasing sequence")
        span = max((s.span for s in self.statistics), default=0)
        if cps[-1] + span > self.window_max:
            raise ValueError(
                f"checkpoint {cps[-1]} + span {span} exceeds window {self.window_max}"
            )
        if not self.statistics:
            raise ValueError("need at least one statistic")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["statistics"] = [s.label() for s in self.statistics]
        return d


@dataclass
class ReportRow:
    statistic: str
    checkpoint: int
    mean: float
    variance: float | None
    stderr: float | None
    reference: float
    ref_kind: str  # "exact" | "prediction"
    error_scale: float
    z: float | None


@dataclass
class ExperimentReport:
    config: dict
    rng_algorithm: str
    version: str
    rows: list[ReportRow]
    elapsed_seconds: float

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "rng_algorithm": self.rng_algorithm,
            "version": self.version,
            "elapsed_seconds": round(self.elapsed_seconds, 3),
            "rows": [asdict(r) for r in self.rows],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = ["statistic,checkpoint,mean,variance,stderr,reference,ref_kind,z"]
        for r in self.rows:
            var = "" if r.variance is None else repr(r.variance)
            se = "" if r.stderr is None else repr(r.stderr)
            z = "" if r.z is None else repr(r.z)
            lines.append(
                f"{r.statistic},{r.checkpoint},{r.mean!r},{var},{se},"
                f"{r.reference!r},{r.ref_kind},{z}"
            )
        return "\n".join(lines) + "\n"


def _exact_reference(spec: StatisticSpec, x: int, table: moments.MomentTable) -> float:
    if spec.kind == "member_count":
        return float(moments.expected_member_count(x, table))
    if spec.kind == "weighted_twin":
        base = moments.expected_That(x, table, start=3)
        return float(base + moments.weighted_twin_start_term(table))
    if spec.kind == "pattern":
        return float(moments.expected_T(x, Pattern(spec.offsets), table))
    if spec.kind == "twin":
        total = 0.0
        for p in counters.interior_patterns(spec.k):
            total += float(moments.expected_T(x, p, table))
        return total
    required = set(spec.gaps)
    total = 0.0
    for p in counters.interior_patterns(spec.gaps[-1]):
        if required <= set(p.offsets):
            total += float(moments.expected_T(x, p, table))
    return total


def _prediction(spec: StatisticSpec, x: int) -> asymptotics.Prediction:
    if spec.kind == "member_count":
        return asymptotics.predict_member_count(x)
    if spec.kind == "weighted_twin":
        return asymptotics.predict_That(x)
    if spec.kind == "pattern":
        return asymptotics.predict_T(x, Pattern(spec.offsets))
    if spec.kind == "twin":
        return asymptotics.predict_twin(x, spec.k)
    return asymptotics.predict_tuple(x, LooseTuple(spec.gaps))


def _path_values(cfg: ExperimentConfig, index: int) -> np.ndarray:
    seed = split_seed(cfg.master_seed, index)
    path = sample_path(cfg.window_max, seed, cfg.sampler)
    out = np.empty((len(cfg.statistics), len(cfg.checkpoints)))
    for i, spec in enumerate(cfg.statistics):
        for j, x in enumerate(cfg.checkpoints):
            out[i, j] = spec.evaluate(path, x)
    return out


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run all paths, aggregate deterministically, attach references."""
    t0 = time.monotonic()
    values = np.empty((cfg.paths, len(cfg.statistics), len(cfg.checkpoints)))
    if cfg.workers == 1:
        for i in range(cfg.paths):
            values[i] = _path_values(cfg, i)
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for i, block in enumerate(
                pool.map(lambda i: _path_values(cfg, i), range(cfg.paths))
            ):
                values[i] = block

    table = None
    if cfg.window_max <= cfg.oracle_n_cap:
        span = max(s.span for s in cfg.statistics)
        table = moments.build_moment_table(
            cfg.window_max, max(span + 1, 1), mode="float"
        )

    rows: list[ReportRow] = []
    r = cfg.paths
    for i, spec in enumerate(cfg.statistics):
        for j, x in enumerate(cfg.checkpoints):
            col = values[:, i, j]
            mean = math.fsum(col) / r
            if r > 1:
                var = math.fsum((v - mean) ** 2 for v in col) / (r - 1)
                stderr = math.sqrt(var / r)
            else:
                var = None
                stderr = None
            pred = _prediction(spec, x)
            if table is not None:
                ref = _exact_reference(spec, x, table)
                ref_kind = "exact"
                scale = 0.0
            else:
                ref = pred.value
                ref_kind = "prediction"
                scale = pred.error_scale
            z = None
            if stderr is not None:
                denom = math.sqrt(stderr**2 + scale**2)
                if denom > 0:
                    z = (mean - ref) / denom
            rows.append(
                ReportRow(
                    statistic=spec.label(),
                    checkpoint=x,
                    mean=mean,
                    variance=var,
                    stderr=stderr,
                    reference=ref,
                    ref_kind=ref_kind,
                    error_scale=scale,
                    z=z,
                )
            )
    return ExperimentReport(
        config=cfg.to_dict(),
        rng_algorithm=RNG_ALGORITHM,
        version=__version__,
        rows=rows,
        elapsed_seconds=time.monotonic() - t0,
    )


# ---------------------------------------------------------------------------
# Convergence scans toward the almost-sure limit densities
# ---------------------------------------------------------------------------

@dataclass
class ConvergencePoint:
    statistic: str
    x: int
    mean: float
    ratio_log: float  # mean * (log x)^l / x
    ratio_m: float  # mean * M_x^l / x


def convergence_scan(cfg: ExperimentConfig) -> list[ConvergencePoint]:
    """Per checkpoint, the counter mean normalized by x/(log x)^l and by
    x/M_x^l; the M-normalized ratio should drift toward 1."""
    report = run_experiment(cfg)
    by_label = {s.label(): s for s in cfg.statistics}
    out = []
    for row in report.rows:
        spec = by_label[row.statistic]
        l = spec.density_exponent
        x = row.checkpoint
        m_x = asymptotics.harmonic_M(x)
        out.append(
            ConvergencePoint(
                statistic=row.statistic,
                x=x,
                mean=row.mean,
                ratio_log=row.mean * math.log(x) ** l / x,
                ratio_m=row.mean * m_x**l / x,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Two-sample equivalence test between the samplers
# ---------------------------------------------------------------------------

@dataclass
class TwoSampleRow:
    statistic: str
    mean_a: float
    mean_b: float
    var_a: float
    var_b: float
    z_mean: float
    p_mean: float
    z_var: float
    p_var: float


@dataclass
class SamplerTestReport:
    window_max: int
    paths: int
    alpha: float
    rows: list[TwoSampleRow]
    corrupted: bool

    @property
    def passed(self) -> bool:
        return all(r.p_mean > self.alpha and r.p_var > self.alpha for r in self.rows)


def _two_sided_p(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def sampler_equivalence_test(
    n: int,
    paths: int,
    master_seed: int,
    alpha: float = 0.01,
    corrupt_rounds: bool = False,
) -> SamplerTestReport:
    """Compare member-count and adjacent-pair statistics between the
    conditional and round-based samplers on independent seed streams.

    ``corrupt_rounds`` switches the rounds sampler's deletion probability to
    1/(P+1) — the built-in negative control; the test must then fail.
    """
    if paths < 2:
        raise ValueError("need at least 2 paths per arm")
    specs = (
        StatisticSpec(kind="member_count"),
        StatisticSpec(kind="twin", k=1),
    )
    x = n - 1  # twin span 1 must fit the window
    seed_a = split_seed(master_seed, 0x5EED_A)
    seed_b = split_seed(master_seed, 0x5EED_B)

    vals_a = np.empty((paths, len(specs)))
    vals_b = np.empty((paths, len(specs)))
    for i in range(paths):
        pa = sample_path(n, split_seed(seed_a, i), "conditional")
        pb = sample_path_rounds(
            n, split_seed(seed_b, i), _denom_shift=1 if corrupt_rounds else 0
        )
        for j, spec in enumerate(specs):
            vals_a[i, j] = spec.evaluate(pa, x)
            vals_b[i, j] = spec.evaluate(pb, x)

    rows = []
    for j, spec in enumerate(specs):
        a = vals_a[:, j]
        b = vals_b[:, j]
        mean_a = math.fsum(a) / paths
        mean_b = math.fsum(b) / paths
        var_a = math.fsum((v - mean_a) ** 2 for v in a) / (paths - 1)
        var_b = math.fsum((v - mean_b) ** 2 for v in b) / (paths - 1)
        z_mean = (mean_a - mean_b) / math.sqrt(var_a / paths + var_b / paths)
        # log-variance comparison; Var(log s^2) ~ 2/(n-1) for near-normal counts
        z_var = (math.log(var_a) - math.log(var_b)) / math.sqrt(4.0 / (paths - 1))
        rows.append(
            TwoSampleRow(
                statistic=spec.label(),
                mean_a=mean_a,
                mean_b=mean_b,
                var_a=var_a,
                var_b=var_b,
                z_mean=z_mean,
                p_mean=_two_sided_p(z_mean),
                z_var=z_var,
                p_var=_two_sided_p(z_var),
            )
        )
    return SamplerTestReport(
        window_max=n, paths=paths, alpha=alpha, rows=rows, corrupted=corrupt_rounds
    )
