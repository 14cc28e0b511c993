"""Bilateral birth-death processes on the integers: convergence-rate,
concentration and truncation bounds, a transient solver for the truncated
forward equations, and a Monte-Carlo cross-check."""

from ._backend import backend_name
from .bounds import (
    BoundReport,
    EnvelopeConstants,
    WeightSequence,
    beta_inf,
    beta_kk,
    convergence_time,
    fit_envelope,
    load_weights,
    mean_error_bound,
    plan_truncation,
    serialize_weights,
    tail_bound,
    theorem1_bound,
    theorem2_bound,
    theorem2_values,
    w_constant,
    weighted_initial_norm,
)
from .errors import (
    BdpzError,
    DecreasingQuotient,
    MassDrift,
    ModelConfigError,
    NoConvergence,
    NotAchievable,
    NotErgodicWithTheseWeights,
    StepTooLarge,
    WeightConfigError,
)
from .model import (
    RateBand,
    RateExpr,
    RateModel,
    StateFactor,
    birth_rate,
    death_rate,
    global_bound,
    load_model,
    rate_upper_bounds,
    serialize_model,
)
from .simulate import (
    EmpiricalDistribution,
    PathSample,
    empirical_distribution,
    sample_path,
)
from .solver import (
    ProbabilitySnapshot,
    Trajectory,
    integrate,
    limiting_cycle,
    moments,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
