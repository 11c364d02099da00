"""Utility-maximizing algorithm configuration under captimes."""
from .distributions import (
    Discrete,
    LogNormal,
    Mixture,
    Pareto,
    RuntimeDistribution,
    TruncatedExtension,
    distribution_from_dict,
    dump_synthetic_spec,
    load_synthetic_spec,
)
from .errors import (
    ExhaustedStreamError,
    FormatError,
    InfeasibleInputsError,
    InputDomainError,
    NoCounterexampleError,
    QuadratureError,
)
from .execution import CostLedger, MatrixSource, RunCache, RunRecord, RunSource, SyntheticSource, load_runtime_matrix
from .harness import ExperimentSpec, benchmark_family, montecarlo_correctness, sweep_captime, sweep_epsilon
from .procedures import ProcedureResult, naive_sample_count, run_naive, run_oracle, run_up
from .stats import (
    AlgorithmStats,
    anytime_epsilon,
    confidence_bounds,
    empirical_stats,
    hoeffding_radius,
    oracle_alpha,
    theoretical_epsilon,
    up_alpha,
)
from .utility import LogLaplace, PiecewiseTable, Uniform, UtilityFunction, parse_utility
from .verification import (
    adversarial_extension,
    necessity_extension,
    run_verification,
    skeptic_check,
    sufficient_captimes,
    truncated_bounds,
)

__version__ = "0.1.0"
