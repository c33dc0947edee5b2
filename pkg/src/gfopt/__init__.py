"""Gradient-free optimisation by repeated Bayes updates and moment matching."""

from .errors import (
    AllInfiniteError,
    ConvergenceError,
    DegenerateColumnWarning,
    DegenerateWeightsError,
    DimensionError,
    DivergedError,
    DomainError,
    GfoptError,
    NonFiniteError,
    ParseError,
    RunAborted,
    SingleClassError,
    UnknownNameError,
)
from .kernels import (
    Family,
    KernelSpec,
    KernelState,
    concentration_point,
    grad_log_partition,
    inv_grad_log_partition,
    inverse_digamma,
    log_partition,
    moment_match_update,
    sample_from_uniforms,
    sufficient_statistic,
)
from .objectives import NoiseSource, ObjectiveHandle, catalog
from .optimizer import (
    LambdaMode,
    OptimizerConfig,
    RunResult,
    Schedule,
    TraceRecord,
    gaussian_config,
    run,
    step_deterministic,
    step_stochastic,
)
from .qmc import Mode as RQMCMode
from .qmc import generate as generate_uniforms
from .smoothing import ParticleCloud, estimate_grad_h, estimate_h, weigh
from .verify import (
    ConditionReport,
    check_descent_lemma,
    check_gradient_equivalence,
    check_schedule_condition,
    probe_epi_convergence,
)

__version__ = "0.1.0"
