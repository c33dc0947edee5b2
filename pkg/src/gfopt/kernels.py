"""Exponential dispersion kernels used as the search distribution.

Two families are supported:

* ``GAUSSIAN``: isotropic normal ``N(theta, gamma * I)``.  The sufficient
  statistic is the identity, ``A(theta) = |theta|^2 / 2`` and natural and
  mean parameters coincide.
* ``GAMMA``: ``d`` independent Gamma coordinates with sufficient statistic
  ``T(x) = log x`` and ``A(theta) = sum(log Gamma(theta_i))``, ``theta_i > 0``.
  Mean parameters are ``psi(theta_i)`` (digamma), so moment matching needs a
  digamma inverse.

Dispersion convention for ``GAMMA``
-----------------------------------
At ``gamma = 1`` a draw is exactly ``Gamma(theta_i, 1)``.  For other values
of ``gamma`` we draw ``Y ~ Gamma(theta_i / gamma, 1)`` (shape inflation, rate
held at one) and map it back through an affine change of ``log Y``::

    log X = psi(theta) + s * (log Y - psi(theta / gamma)),
    s = sqrt(gamma * psi'(theta) / psi'(theta / gamma))

so that ``E[T(X)] = psi(theta) = grad A(theta)`` and
``var[T(X)] = gamma * psi'(theta) = gamma * hess A(theta)`` hold exactly, the
two moment identities an exponential dispersion model must satisfy.  The
shape of ``T(X)`` is log-gamma with skewness vanishing as ``gamma -> 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import special

from .errors import (
    ConvergenceError,
    DegenerateWeightsError,
    DimensionError,
    DomainError,
    NonFiniteError,
)

if TYPE_CHECKING:
    from .smoothing import ParticleCloud

EULER_GAMMA = 0.57721566490153286061

__all__ = [
    "Family",
    "KernelSpec",
    "KernelState",
    "log_partition",
    "grad_log_partition",
    "inv_grad_log_partition",
    "inverse_digamma",
    "sufficient_statistic",
    "sample_from_uniforms",
    "moment_match_update",
    "concentration_point",
]


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    GAMMA = "gamma"


@dataclass(frozen=True)
class KernelSpec:
    family: Family
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if int(self.dim) < 1:
            raise DimensionError("dim must be >= 1")
        object.__setattr__(self, "dim", int(self.dim))


@dataclass(frozen=True)
class KernelState:
    """Natural parameter ``theta``, dispersion ``gamma`` and weight scale ``lam``."""

    theta: np.ndarray
    gamma: float
    lam: float = 1.0

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if not np.all(np.isfinite(theta)):
            raise NonFiniteError("theta must be finite")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be > 0, got {self.gamma}")
        if not self.lam > 0:
            raise DomainError(f"lambda must be > 0, got {self.lam}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def dim(self) -> int:
        return self.theta.shape[0]


def _check_theta(spec: KernelSpec, theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (spec.dim,):
        raise DomainError(f"theta has shape {theta.shape}, expected ({spec.dim},)")
    if spec.family is Family.GAMMA and not np.all(theta > 0):
        raise DomainError("Gamma kernel requires every theta_i > 0")
    return theta


def log_partition(spec: KernelSpec, theta) -> float:
    theta = _check_theta(spec, theta)
    if spec.family is Family.GAUSSIAN:
        value = 0.5 * float(np.dot(theta, theta))
    else:
        value = float(np.sum(special.gammaln(theta)))
    if not np.isfinite(value):
        raise NonFiniteError("log-partition overflowed")
    return value


def grad_log_partition(spec: KernelSpec, theta) -> np.ndarray:
    theta = _check_theta(spec, theta)
    if spec.family is Family.GAUSSIAN:
        return theta.copy()
    return special.digamma(theta)


def inverse_digamma(mu, tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """Solve ``psi(theta) = mu`` elementwise for ``theta > 0``.

    Newton iterations from Minka's starting point, kept inside a bracket that
    shrinks with every evaluation; a step leaving the bracket is replaced by
    bisection (or doubling while no upper end is known).
    """
    mu = np.asarray(mu, dtype=float)
    scalar = mu.ndim == 0
    mu = np.atleast_1d(mu)
    if not np.all(np.isfinite(mu)):
        raise ConvergenceError("digamma inversion needs finite mean parameters")
    with np.errstate(over="ignore"):
        theta = np.where(mu >= -2.22, np.exp(mu) + 0.5, -1.0 / (mu + EULER_GAMMA))
    if not np.all(np.isfinite(theta)):
        raise NonFiniteError("mean parameter too large for digamma inversion")

    lo = np.zeros_like(mu)
    hi = np.full_like(mu, np.inf)
    done = np.zeros(mu.shape, dtype=bool)
    for _ in range(max_iter):
        f = special.digamma(theta) - mu
        done |= np.abs(f) <= tol * np.maximum(1.0, np.abs(mu))
        if done.all():
            break
        lo = np.where(f < 0, theta, lo)
        hi = np.where(f > 0, theta, hi)
        step = f / special.polygamma(1, theta)
        cand = theta - step
        bad = ~((cand > lo) & (cand < hi))
        fallback = np.where(np.isfinite(hi), 0.5 * (lo + hi), 2.0 * theta)
        cand = np.where(bad, fallback, cand)
        tiny = np.abs(cand - theta) <= 4 * np.finfo(float).eps * theta
        theta = np.where(done, theta, cand)
        done |= tiny
    else:
        f = special.digamma(theta) - mu
        if not np.all(done | (np.abs(f) <= 1e-10)):
            raise ConvergenceError("digamma inversion did not converge")
    return theta[0] if scalar else theta


def inv_grad_log_partition(spec: KernelSpec, mu) -> np.ndarray:
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.shape != (spec.dim,):
        raise DomainError(f"mu has shape {mu.shape}, expected ({spec.dim},)")
    if not np.all(np.isfinite(mu)):
        raise NonFiniteError("mean parameter is not finite")
    if spec.family is Family.GAUSSIAN:
        return mu.copy()
    return inverse_digamma(mu)


def sufficient_statistic(spec: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if spec.family is Family.GAUSSIAN:
        return x
    if np.any(x <= 0):
        raise DomainError("Gamma kernel points must be positive")
    return np.log(x)


def _gamma_log_quantile(shape, u):
    """``log`` of the Gamma(shape, 1) quantile, safe when the quantile underflows."""
    y = special.gammaincinv(shape, u)
    with np.errstate(divide="ignore"):
        logy = np.log(y)
    # lower tail: P(Y <= y) ~ y^k / Gamma(k + 1)
    small = y < 1e-280
    if np.any(small):
        k = np.broadcast_to(shape, u.shape)[small]
        logy[small] = (np.log(u[small]) + special.gammaln(k + 1.0)) / k
    return logy


def sample_from_uniforms(spec: KernelSpec, state: KernelState, uniforms) -> np.ndarray:
    """Map an ``(N, d)`` array of uniforms to ``N`` draws of the kernel."""
    u = np.asarray(getattr(uniforms, "points", uniforms), dtype=float)
    if u.ndim != 2 or u.shape[1] != spec.dim:
        raise DomainError(f"uniforms must have shape (N, {spec.dim}), got {u.shape}")
    if not np.all((u > 0) & (u < 1)):
        raise DomainError("uniforms must lie strictly inside (0, 1)")
    theta = _check_theta(spec, state.theta)
    gamma = state.gamma
    if spec.family is Family.GAUSSIAN:
        return theta + np.sqrt(gamma) * special.ndtri(u)

    shape = theta / gamma
    logy = _gamma_log_quantile(shape, u)
    scale = np.sqrt(gamma * special.polygamma(1, theta) / special.polygamma(1, shape))
    logx = special.digamma(theta) + scale * (logy - special.digamma(shape))
    with np.errstate(over="raise"):
        try:
            x = np.exp(logx)
        except FloatingPointError as exc:
            raise NonFiniteError("Gamma kernel draw overflowed") from exc
    if np.any(x <= 0):
        raise NonFiniteError("Gamma kernel draw underflowed to zero")
    return x


def _normalised_weights(log_weights) -> np.ndarray:
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        raise DegenerateWeightsError("no particle has a finite log-weight")
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise NonFiniteError("log-weights must be finite or -inf")
    return np.exp(lw - lw.max())


def moment_match_update(spec: KernelSpec, state: KernelState, cloud: "ParticleCloud") -> np.ndarray:
    """KL projection of the reweighted cloud back onto the family.

    Matches ``grad A(theta_new)`` to the self-normalised weighted mean of the
    sufficient statistic.  For the Gaussian family the result is the weighted
    particle mean, written as a correction to ``theta``.
    """
    w = _normalised_weights(cloud.log_weights)
    points = np.asarray(cloud.points, dtype=float)
    total = np.sum(w)
    if spec.family is Family.GAUSSIAN:
        theta = np.asarray(state.theta, dtype=float)
        shift = np.sum(w[:, None] * (points - theta), axis=0) / total
        new = theta + shift
        if not np.all(np.isfinite(new)):
            raise NonFiniteError("moment matching produced a non-finite mean")
        return new
    t = sufficient_statistic(spec, points)
    mu_hat = np.sum(w[:, None] * t, axis=0) / total
    if not np.all(np.isfinite(mu_hat)):
        raise NonFiniteError("weighted mean left the mean-parameter domain")
    return inv_grad_log_partition(spec, mu_hat)


def concentration_point(spec: KernelSpec, theta) -> np.ndarray:
    """Point of the sample space the kernel concentrates on as ``gamma -> 0``."""
    mu = grad_log_partition(spec, theta)
    return mu if spec.family is Family.GAUSSIAN else np.exp(mu)
