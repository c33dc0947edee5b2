"""Particle estimates of the smoothed objective and its gradient.

For a kernel ``pi_{theta,gamma}`` and weight scale ``lam`` the smoothed
objective is::

    h(theta) = -log E_{X ~ pi_{theta,gamma}} [exp(-lam * l(X))]

A cloud drawn exactly from the kernel and weighted by ``exp(-lam * l)`` gives
an unbiased estimate of the expectation (plain ``1/N`` average), and the
self-normalised weighted mean gives ``grad h`` through

    grad h(theta) = -(1/gamma) * E_weighted[X - theta]

which is why one moment-matching step equals ``theta - gamma * grad h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import AllInfiniteError, DomainError, NonFiniteError
from .kernels import Family, KernelSpec, KernelState, sample_from_uniforms
from .objectives import Kind, NoiseSource, ObjectiveHandle, eval_batch, eval_noisy_batch


@dataclass(frozen=True)
class ParticleCloud:
    points: np.ndarray
    log_weights: np.ndarray
    source_state: KernelState
    values: Optional[np.ndarray] = None  # raw objective values, before scaling by lam
    spec: Optional[KernelSpec] = None

    @property
    def size(self) -> int:
        return self.log_weights.shape[0]

    def normalised_weights(self) -> np.ndarray:
        w = _shifted_weights(self.log_weights)
        return w / np.sum(w)


def _shifted_weights(log_weights) -> np.ndarray:
    lw = np.asarray(log_weights, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise AllInfiniteError("every log-weight is -inf")
    return np.exp(lw - lw.max())


def cloud_from_values(points, values, state: KernelState, spec: Optional[KernelSpec] = None) -> ParticleCloud:
    """Weigh points whose objective values are already known."""
    values = np.asarray(values, dtype=float)
    with np.errstate(invalid="ignore"):
        log_weights = -state.lam * values
    if np.any(np.isnan(log_weights)):
        raise NonFiniteError("objective produced NaN")
    if not np.any(np.isfinite(log_weights)):
        raise AllInfiniteError("every particle has infinite objective value")
    return ParticleCloud(np.asarray(points, dtype=float), log_weights, state, values, spec)


def weigh(points, obj: ObjectiveHandle, state: KernelState, noise: Optional[NoiseSource] = None,
          spec: Optional[KernelSpec] = None) -> ParticleCloud:
    """Log-weights ``-lam * l(x_i)``; with ``noise``, ``-lam * ell(x_i, U)`` for one shared ``U``."""
    if noise is not None and obj.kind is Kind.NOISY:
        values = eval_noisy_batch(obj, points, noise.draw(obj))
    else:
        values = eval_batch(obj, points)
    return cloud_from_values(points, values, state, spec)


def estimate_h(cloud: ParticleCloud) -> float:
    lw = np.asarray(cloud.log_weights, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise AllInfiniteError("every log-weight is -inf")
    m = lw.max()
    return float(-(m + np.log(np.mean(np.exp(lw - m)))))


def estimate_grad_h(cloud: ParticleCloud) -> np.ndarray:
    if cloud.spec is not None and cloud.spec.family is not Family.GAUSSIAN:
        raise DomainError("particle gradient is only defined for the Gaussian kernel")
    w = _shifted_weights(cloud.log_weights)
    theta = cloud.source_state.theta
    shift = np.sum(w[:, None] * (cloud.points - theta), axis=0) / np.sum(w)
    return -shift / cloud.source_state.gamma


def h_standard_error(cloud: ParticleCloud) -> float:
    """Delta-method standard error of ``estimate_h`` treating draws as i.i.d."""
    w = _shifted_weights(cloud.log_weights)
    n = w.shape[0]
    return float(np.std(w) / (np.sqrt(n) * np.mean(w)))


def grad_standard_error(cloud: ParticleCloud) -> np.ndarray:
    """Per-coordinate standard error of ``estimate_grad_h`` (ratio-estimator form)."""
    w = _shifted_weights(cloud.log_weights)
    wn = w / np.sum(w)
    dev = cloud.points - cloud.source_state.theta
    dev = dev - np.sum(wn[:, None] * dev, axis=0)
    return np.sqrt(np.sum((wn[:, None] * dev) ** 2, axis=0)) / cloud.source_state.gamma


def closed_form_h_quadratic(theta, gamma: float, lam: float = 1.0):
    """Exact ``(h, grad h)`` for ``l(x) = |x|^2 / 2`` under the Gaussian kernel."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not (gamma > 0 and lam > 0):
        raise DomainError("gamma and lambda must be positive")
    d = theta.shape[0]
    k = 1.0 + lam * gamma
    h = lam * float(np.dot(theta, theta)) / (2.0 * k) + 0.5 * d * np.log(k)
    return h, lam * theta / k


def gaussian_cloud(obj: ObjectiveHandle, state: KernelState, uniforms, noise=None) -> ParticleCloud:
    spec = KernelSpec(Family.GAUSSIAN, state.dim)
    points = sample_from_uniforms(spec, state, uniforms)
    return weigh(points, obj, state, noise, spec)


def finite_difference_grad_h(obj: ObjectiveHandle, state: KernelState, uniforms, eps=None) -> np.ndarray:
    """Central differences of ``estimate_h`` reusing ``uniforms`` at every shifted ``theta``.

    Default step per coordinate is ``1e-4 * (1 + |theta_j|)``.
    """
    theta = state.theta
    d = theta.shape[0]
    if eps is None:
        eps = 1e-4 * (1.0 + np.abs(theta))
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (d,))
    grad = np.empty(d)
    for j in range(d):
        e = np.zeros(d)
        e[j] = eps[j]
        hp = estimate_h(gaussian_cloud(obj, KernelState(theta + e, state.gamma, state.lam), uniforms))
        hm = estimate_h(gaussian_cloud(obj, KernelState(theta - e, state.gamma, state.lam), uniforms))
        grad[j] = (hp - hm) / (2.0 * eps[j])
    return grad


def quadrature_h_1d(func, theta, gamma: float, lam: float = 1.0, *, half_width: float = 12.0,
                    nodes: int = 48001) -> np.ndarray:
    """Deterministic ``h`` for a one-dimensional objective by trapezoid quadrature.

    ``func`` maps an ``(N, 1)`` array to ``N`` values.  The integrand is
    evaluated on a uniform grid in the standardised variable, which copes with
    jump discontinuities at first-order accuracy in the grid step.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    z = np.linspace(-half_width, half_width, nodes)
    logphi = -0.5 * z * z - 0.5 * np.log(2 * np.pi)
    dz = z[1] - z[0]
    tw = np.full(nodes, dz)
    tw[0] = tw[-1] = 0.5 * dz
    out = np.empty(theta.shape[0])
    for i, t in enumerate(theta):
        x = t + np.sqrt(gamma) * z
        vals = np.asarray(func(x[:, None]), dtype=float)
        out[i] = -special.logsumexp(-lam * vals + logphi, b=tw)
    return out
