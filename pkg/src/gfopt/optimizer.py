"""Sample, weigh, project, shrink.

Each iteration draws ``N`` quasi-random points from the current kernel
``pi_{theta_n, gamma_n}``, weighs them by ``exp(-lam * l(x))``, sets
``theta_{n+1}`` by moment matching and shrinks the dispersion to
``gamma_{n+1} = (1 + n + 1) ** -beta``.  With noisy objectives a single noise
draw ``U_{n+1}`` is shared by every particle of iteration ``n``.

Output conventions: a deterministic run reports the best particle evaluated
over the whole run; a stochastic run reports the point the final kernel
concentrates on (``theta`` itself for the Gaussian kernel).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from . import qmc
from .errors import (
    AllInfiniteError,
    DivergedError,
    DomainError,
    NonFiniteError,
    RunAborted,
)
from .kernels import (
    Family,
    KernelSpec,
    KernelState,
    concentration_point,
    moment_match_update,
    sample_from_uniforms,
)
from .objectives import Kind, NoiseSource, ObjectiveHandle, eval_batch, eval_noisy_batch
from .smoothing import ParticleCloud, cloud_from_values, estimate_h

DIVERGENCE_BOUND = 1e8
MAX_CONSECUTIVE_ALL_INFINITE = 3


class LambdaMode(str, enum.Enum):
    FIXED = "fixed"
    FIRST_K = "first-k"
    ALWAYS = "always"


@dataclass(frozen=True)
class Schedule:
    """``gamma_n = (1 + n) ** -beta`` and the weight-scale adaptation policy.

    ``first_k`` only matters for ``LambdaMode.FIRST_K``; when left ``None`` it
    defaults to 10% of the run length.
    """

    beta: float = 0.4
    lambda_mode: LambdaMode = LambdaMode.ALWAYS
    lambda_init: float = 1.0
    first_k: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise DomainError(f"beta must lie in (0,1), got {self.beta}")
        if not self.lambda_init > 0:
            raise DomainError(f"lambda_init must be > 0, got {self.lambda_init}")
        object.__setattr__(self, "lambda_mode", LambdaMode(self.lambda_mode))
        if self.first_k is not None and int(self.first_k) < 0:
            raise DomainError("first_k must be >= 0")

    def gamma(self, n: int) -> float:
        return (1.0 + n) ** -self.beta

    def adapts(self, n: int, iterations: int) -> bool:
        if self.lambda_mode is LambdaMode.ALWAYS:
            return True
        if self.lambda_mode is LambdaMode.FIXED:
            return False
        k = self.first_k if self.first_k is not None else max(1, round(0.1 * iterations))
        return n < k


@dataclass(frozen=True)
class OptimizerConfig:
    kernel: KernelSpec
    schedule: Schedule = field(default_factory=Schedule)
    particles: int = 128
    iterations: int = 1000
    seed: int = 0
    rqmc_mode: qmc.Mode = qmc.Mode.SOBOL
    target_logweight_var: float = 1.0
    batch_size: Optional[int] = None

    def __post_init__(self):
        if int(self.particles) < 2:
            raise DomainError("need at least 2 particles")
        if int(self.iterations) < 1:
            raise DomainError("need at least 1 iteration")
        if not self.target_logweight_var > 0:
            raise DomainError("target_logweight_var must be > 0")
        object.__setattr__(self, "rqmc_mode", qmc.Mode(self.rqmc_mode))


@dataclass(frozen=True)
class TraceRecord:
    n: int
    theta: np.ndarray
    gamma: float
    lam: float
    h: float
    best_value: float
    best_point: np.ndarray
    min_l: float
    max_l: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "theta": [float(v) for v in self.theta],
            "gamma": self.gamma,
            "lambda": self.lam,
            "h": self.h,
            "best_value": self.best_value,
            "best_point": [float(v) for v in self.best_point],
            "min_l": self.min_l,
            "max_l": self.max_l,
        }


class StepResult(NamedTuple):
    state: KernelState
    cloud: ParticleCloud
    record: TraceRecord


class RunResult(NamedTuple):
    state: KernelState
    trace: List[TraceRecord]
    output_point: np.ndarray


def adapt_lambda(values, target_var: float = 1.0, previous: float = 1.0):
    """Scale ``lam`` so that ``var(-lam * l(x_i)) == target_var``.

    Uses the population variance (denominator ``N``).  Returns
    ``(lam, degenerate)``; when the finite values have zero variance the
    previous scale is kept and ``degenerate`` is True.
    """
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    if finite.shape[0] < 2:
        return previous, True
    var = float(np.var(finite))
    if not var > 0 or not np.isfinite(var):
        return previous, True
    return float(np.sqrt(target_var / var)), False


def _step(state, obj, config, n, noise, best):
    spec = config.kernel
    uniforms = qmc.generate(config.rqmc_mode, config.particles, spec.dim, config.seed, index=n)
    points = sample_from_uniforms(spec, state, uniforms)
    if noise is not None:
        values = eval_noisy_batch(obj, points, noise.at(n).draw(obj))
    else:
        values = eval_batch(obj, points)

    lam = state.lam
    if config.schedule.adapts(n, config.iterations):
        lam, _ = adapt_lambda(values, config.target_logweight_var, lam)
    current = KernelState(state.theta, state.gamma, lam)
    cloud = cloud_from_values(points, values, current, spec)

    theta_new = moment_match_update(spec, current, cloud)
    if not np.all(np.isfinite(theta_new)) or np.linalg.norm(theta_new) > DIVERGENCE_BOUND:
        raise DivergedError(f"|theta| exceeded {DIVERGENCE_BOUND:g} at iteration {n}")
    new_state = KernelState(theta_new, config.schedule.gamma(n + 1), lam)

    finite = np.isfinite(values)
    i = int(np.argmin(np.where(finite, values, np.inf)))
    best_value, best_point = float(values[i]), points[i].copy()
    if best is not None and best[0] <= best_value:
        best_value, best_point = best
    record = TraceRecord(
        n=n, theta=state.theta.copy(), gamma=state.gamma, lam=lam, h=estimate_h(cloud),
        best_value=best_value, best_point=best_point,
        min_l=float(values[finite].min()), max_l=float(values[finite].max()),
    )
    return StepResult(new_state, cloud, record)


def step_deterministic(state: KernelState, obj: ObjectiveHandle, config: OptimizerConfig, n: int,
                       best=None) -> StepResult:
    """One iteration on ``l``.  ``best`` is an optional running ``(value, point)``."""
    return _step(state, obj, config, n, None, best)


def step_stochastic(state: KernelState, obj: ObjectiveHandle, config: OptimizerConfig, n: int,
                    noise: NoiseSource, best=None) -> StepResult:
    """One iteration on ``ell(., U_{n+1})`` with ``U`` keyed by ``noise`` and ``n``."""
    if obj.kind is not Kind.NOISY:
        raise ValueError(f"objective {obj.name!r} is deterministic")
    return _step(state, obj, config, n, noise, best)


def initial_state(config: OptimizerConfig, theta0) -> KernelState:
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if theta0.shape != (config.kernel.dim,):
        raise DomainError(f"theta0 has shape {theta0.shape}, expected ({config.kernel.dim},)")
    return KernelState(theta0, config.schedule.gamma(0), config.schedule.lambda_init)


def run(config: OptimizerConfig, obj: ObjectiveHandle, theta0, *, noise: Optional[NoiseSource] = None,
        stochastic: Optional[bool] = None,
        callback: Optional[Callable[[TraceRecord], None]] = None) -> RunResult:
    """Iterate ``config.iterations`` steps from ``theta0``.

    Noisy objectives run the stochastic variant by default, with noise keyed
    by ``config.seed`` unless ``noise`` is given.  More than three consecutive
    iterations in which every particle has infinite objective value abort the
    run with ``RunAborted`` carrying the partial trace.
    """
    if stochastic is None:
        stochastic = obj.kind is Kind.NOISY
    if stochastic and noise is None:
        noise = NoiseSource(config.seed)
    state = initial_state(config, theta0)
    trace: List[TraceRecord] = []
    best = None
    misses = 0
    for n in range(config.iterations):
        try:
            result = _step(state, obj, config, n, noise if stochastic else None, best)
        except AllInfiniteError as exc:
            misses += 1
            if misses > MAX_CONSECUTIVE_ALL_INFINITE:
                raise RunAborted(f"all particles infinite at iterations {n - misses + 1}..{n}",
                                 trace, state) from exc
            state = KernelState(state.theta, config.schedule.gamma(n + 1), state.lam)
            continue
        except (DivergedError, NonFiniteError) as exc:
            raise RunAborted(str(exc), trace, state) from exc
        misses = 0
        state = result.state
        rec = result.record
        best = (rec.best_value, rec.best_point)
        trace.append(rec)
        if callback is not None:
            callback(rec)

    if stochastic:
        output = concentration_point(config.kernel, state.theta)
    elif best is not None:
        output = best[1].copy()
    else:
        output = concentration_point(config.kernel, state.theta)
    return RunResult(state, trace, output)


def gaussian_config(dim: int, **kwargs) -> OptimizerConfig:
    """Shorthand for a Gaussian-kernel configuration."""
    return OptimizerConfig(kernel=KernelSpec(Family.GAUSSIAN, dim), **kwargs)
