"""Simulation and exact-verification laboratory for the Hawkins random sieve.

Layers, from ground truth upward:

* ``measure`` — exact rational measure on elementary sets (full enumeration
  at small cutoffs) and the closed-form conditional probability formulas.
* ``moments`` — triangular ladders giving exact expectations at any n:
  pure moments E(y_n^k) and the counter moments E(T), E(T^2), mixed.
* ``asymptotics`` — the M_n-expansion predictors and residual checkers.
* ``sieve`` / ``counters`` — reproducible path sampling and the counting
  statistics themselves.
* ``experiment`` — multi-path Monte Carlo with exact/predicted references.
"""

from .counters import (
    LooseTuple,
    Pattern,
    arithmetic_tuple,
    count_exact_pattern,
    count_tuple,
    count_twin,
    decompose_twin_identity,
    interior_patterns,
    prime_count,
    weighted_twin_sum,
)
from .measure import (
    ElementarySet,
    MeasureTable,
    ResourceLimitError,
    enumerate_level,
    exact_moment,
    membership_prob,
    mu,
    pattern_conditional_prob,
    pattern_prob_bruteforce,
    twin_conditional_prob,
)
from .moments import (
    MomentTable,
    build_moment_table,
    expected_member_count,
    expected_T,
    expected_T_curve,
    expected_T_second,
    expected_That,
    expected_That_second,
    expected_yT,
    pattern_window_ladder,
    weighted_twin_window_ladder,
)
from .asymptotics import (
    ExpansionSpec,
    Prediction,
    coeff_c,
    harmonic_M,
    harmonic_M_array,
    lemma1_expansion,
    lemma1_sum_exact,
    limit_density,
    normalized_residual,
    predict_moment,
    predict_T,
    predict_T_second,
    predict_That,
    predict_That_second,
    predict_twin,
    predict_tuple,
    predict_yT,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    StatisticSpec,
    convergence_scan,
    run_experiment,
    sampler_equivalence_test,
)
from .rng import RNG_ALGORITHM, mix64, split_seed
from .sieve import (
    SievePath,
    iter_member_blocks,
    sample_path,
    sample_path_conditional,
    sample_path_rounds,
    survival_weight,
)

__version__ = "0.1.0"
