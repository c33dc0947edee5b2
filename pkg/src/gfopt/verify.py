"""Numerical checks of the properties the convergence argument relies on.

Each check returns a :class:`ConditionReport`.  These are falsification
probes at desk scale, not proofs: Monte Carlo checks carry an explicit slack
of three standard errors plus ``1e-6``, and epi-convergence is probed on a
finite grid along a finite family of approach sequences.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import qmc
from .kernels import KernelState
from .objectives import ObjectiveHandle, catalog, epi_family
from .smoothing import (
    closed_form_h_quadratic,
    estimate_grad_h,
    estimate_h,
    finite_difference_grad_h,
    gaussian_cloud,
    grad_standard_error,
    h_standard_error,
    quadrature_h_1d,
)

REPORT_SCHEMA = {"schema": "gfopt.report", "version": 1}


@dataclass
class ConditionReport:
    """Outcome of one check; ``passed`` holds iff ``violations == 0``.

    ``max_slack`` is the largest amount by which a checked inequality was
    exceeded before applying its tolerance (negative: satisfied everywhere).
    """

    name: str
    samples_checked: int
    violations: int
    max_slack: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        return out

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: checked={self.samples_checked} "
                f"violations={self.violations} max_slack={self.max_slack:.3e}")


def write_reports(reports: Iterable[ConditionReport], fh) -> None:
    fh.write(json.dumps(REPORT_SCHEMA) + "\n")
    for rep in reports:
        fh.write(json.dumps(rep.to_dict(), default=_jsonable, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(type(obj))


# -- descent lemma -----------------------------------------------------------


def _exact_h_grad(obj: ObjectiveHandle, theta, gamma, lam):
    if obj.name == "quadratic":
        return closed_form_h_quadratic(theta, gamma, lam)
    if obj.name in ("constant", "counterexample_diag"):
        return obj.exact_h(theta, gamma, lam), np.zeros_like(theta)
    raise ValueError(f"no closed form for {obj.name!r}")


def descent_gap(obj, theta, theta_p, gamma, lam=1.0, uniforms=None):
    """``(lhs, rhs, tol)`` of ``h(t') <= h(t) + <grad h(t), t'-t> + |t'-t|^2/(2 gamma)``.

    Uses the closed form when ``uniforms`` is None, otherwise particle
    estimates sharing ``uniforms`` between ``theta`` and ``theta_p``.
    """
    theta = np.atleast_1d(np.asarray(theta, float))
    theta_p = np.atleast_1d(np.asarray(theta_p, float))
    delta = theta_p - theta
    quad = float(np.dot(delta, delta)) / (2.0 * gamma)
    if uniforms is None:
        h, g = _exact_h_grad(obj, theta, gamma, lam)
        hp, _ = _exact_h_grad(obj, theta_p, gamma, lam)
        lhs, rhs = hp, h + float(np.dot(g, delta)) + quad
        return lhs, rhs, 1e-12 * max(1.0, abs(lhs), abs(rhs))
    c = gaussian_cloud(obj, KernelState(theta, gamma, lam), uniforms)
    cp = gaussian_cloud(obj, KernelState(theta_p, gamma, lam), uniforms)
    g = estimate_grad_h(c)
    lhs = estimate_h(cp)
    rhs = estimate_h(c) + float(np.dot(g, delta)) + quad
    se = h_standard_error(c) + h_standard_error(cp) + float(np.dot(np.abs(delta), grad_standard_error(c)))
    return lhs, rhs, 3.0 * se + 1e-6


def check_descent_lemma(obj: ObjectiveHandle, gamma: float, lam: float = 1.0, trials: int = 100,
                        seed: int = 0, *, exact: bool = False, particles: int = 2**14,
                        box: float = 3.0, rqmc: str = "sobol") -> ConditionReport:
    """Descent inequality at ``trials`` random pairs in ``[-box, box]^d``."""
    rng = np.random.Generator(np.random.PCG64(qmc.seed_sequence(seed, 2)))
    d = obj.dim
    worst = -np.inf
    violations = 0
    curvature = 0.0
    for t in range(trials):
        theta = rng.uniform(-box, box, d)
        theta_p = rng.uniform(-box, box, d)
        u = None if exact else qmc.generate(rqmc, particles, d, seed, index=t)
        lhs, rhs, tol = descent_gap(obj, theta, theta_p, gamma, lam, u)
        excess = lhs - rhs
        worst = max(worst, excess)
        violations += excess > tol
        # empirical curvature surrogate: informational only
        dist2 = float(np.sum((theta_p - theta) ** 2))
        if dist2 > 0:
            quad = dist2 / (2 * gamma)
            curvature = max(curvature, 2.0 * (lhs - (rhs - quad)) / dist2)
    mode = "exact" if exact else f"mc,N={particles}"
    return ConditionReport(
        f"descent[{obj.name},{mode},gamma={gamma:g}]", trials, int(violations), float(worst),
        {"gamma": gamma, "lambda": lam, "curvature_bound": 1.0 / gamma,
         "empirical_curvature": curvature},
    )


# -- gradient equivalence ----------------------------------------------------


def check_gradient_equivalence(obj: ObjectiveHandle, theta_grid, gamma: float, seed: int = 0, *,
                               lam: float = 1.0, particles: int = 2**14, rtol: float = 5e-2,
                               atol: float = 1e-2, eps=None, rqmc: str = "sobol") -> ConditionReport:
    """Particle gradient against central differences of the particle ``h``.

    Both use the same uniform batch at every grid point.  For objectives not
    flagged smooth the difference step is widened to at least
    ``0.05 * sqrt(gamma)``: with shared uniforms a jump in ``l`` makes the
    estimated ``h`` piecewise constant in ``theta`` at the particle spacing.
    """
    grid = np.asarray(theta_grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None] if obj.dim == 1 else grid[None, :]
    worst = 0.0
    violations = 0
    rows = []
    for i, theta in enumerate(grid):
        u = qmc.generate(rqmc, particles, obj.dim, seed, index=i)
        state = KernelState(theta, gamma, lam)
        g = estimate_grad_h(gaussian_cloud(obj, state, u))
        step = eps
        if step is None:
            step = 1e-4 * (1.0 + np.abs(theta))
            if not obj.smooth:
                step = np.maximum(step, 0.05 * np.sqrt(gamma))
        fd = finite_difference_grad_h(obj, state, u, step)
        err = np.abs(g - fd)
        allowed = np.maximum(rtol * np.abs(fd), atol)
        violations += int(np.sum(err > allowed))
        rel = err / np.maximum(np.abs(fd), atol / rtol)
        worst = max(worst, float(np.max(rel)))
        rows.append({"theta": theta, "particle": g, "finite_difference": fd})
    return ConditionReport(f"gradient[{obj.name},gamma={gamma:g}]", grid.size, violations,
                           worst - rtol, {"rtol": rtol, "atol": atol, "points": rows})


# -- schedule / drift condition ------------------------------------------------


def drift_bound(beta: float, d: int, n) -> np.ndarray:
    """``delta_n`` for ``gamma_n = n**-beta``, evaluated without cancellation."""
    n = np.asarray(n, dtype=float)
    g = n**-beta
    log_ratio = np.log1p(1.0 / n)  # log(n+1) - log(n)
    ratio_term = np.expm1(0.5 * d * beta * log_ratio)
    g_diff = -g * np.expm1(-beta * log_ratio)  # gamma_n - gamma_{n+1}
    return ratio_term * (g + 1.0) + g_diff + g * g


def check_schedule_condition(beta: float, d: int, n_max: int = 10**6, threshold: float = 1e-2,
                             monotone_from: int = 100) -> ConditionReport:
    """Drift/step-size conditions for ``gamma_n = n**-beta``.

    Checks ``delta_n/gamma_n < threshold`` and ``delta_n/gamma_{n+1} <
    threshold`` at ``n_max``, monotone decrease of both ratios from
    ``monotone_from`` on, and divergence of ``sum gamma_n`` through the
    growth exponent of its partial sums (expected ``1 - beta``).
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0,1)")
    n = np.arange(1, n_max + 1, dtype=float)
    gamma = n**-beta
    gamma_next = (n + 1.0) ** -beta
    delta = drift_bound(beta, d, n)
    r_now = delta / gamma
    r_next = delta / gamma_next
    tail = slice(monotone_from - 1, None)
    mono_now = bool(np.all(np.diff(r_now[tail]) < 0))
    mono_next = bool(np.all(np.diff(r_next[tail]) < 0))
    partial = np.cumsum(gamma)
    m = max(n_max // 10, 1)
    growth = float(np.log(partial[-1] / partial[m - 1]) / np.log(n_max / m))
    checks = {
        "ratio_now_below": bool(r_now[-1] < threshold),
        "ratio_next_below": bool(r_next[-1] < threshold),
        "ratio_now_monotone": mono_now,
        "ratio_next_monotone": mono_next,
        "partial_sums_diverge": bool(abs(growth - (1 - beta)) < 0.05),
    }
    return ConditionReport(
        f"schedule[beta={beta:g},d={d}]", n_max, sum(not ok for ok in checks.values()),
        float(max(r_now[-1], r_next[-1]) - threshold),
        {"checks": checks, "delta_1": float(delta[0]), "ratio_now": float(r_now[-1]),
         "ratio_next": float(r_next[-1]), "partial_sum": float(partial[-1]),
         "growth_exponent": growth},
    )


# -- epi-convergence probes --------------------------------------------------

DEFAULT_EXPONENTS = (0.25, 0.5, 1.0, 2.0)
DEFAULT_N_LIST = tuple(sorted({10**k for k in range(1, 7)} | {10**k + 1 for k in range(1, 7)}))

_NAMED_LIMITS = {
    "epi_neg": lambda t: np.where(np.asarray(t) == 0, -1.0, 0.0),
    "epi_pos": lambda t: np.zeros_like(np.asarray(t, float)),
}


def laplace_family(obj: ObjectiveHandle, beta: float = 0.4, lam: float = 1.0):
    """``(n, theta) -> h_{gamma_n}(theta)`` with ``gamma_n = n**-beta``, by quadrature."""
    if obj.dim != 1:
        raise ValueError("laplace_family needs a one-dimensional objective")
    return lambda n, theta: quadrature_h_1d(obj.func, theta, float(n) ** -beta, lam)


def probe_epi_convergence(family: Union[str, Callable], theta_grid: Sequence[float] = (-1.0, -0.5, 0.0, 0.5, 1.0),
                          n_list: Sequence[int] = DEFAULT_N_LIST, *, limit: Optional[Callable] = None,
                          tol: float = 1e-3, exponents: Sequence[float] = DEFAULT_EXPONENTS,
                          tail: int = 2, name: Optional[str] = None) -> ConditionReport:
    """Estimate lower and upper epi-limits on a grid and compare them.

    Approach sequences at ``theta`` are the constant one and
    ``theta +/- n**-alpha`` for each exponent.  Over the last ``tail`` entries
    of ``n_list`` the lower epi-limit is estimated by the smallest tail value
    over all sequences, and the upper one by the smallest tail maximum.
    A grid point counts as a violation if the two differ by more than
    ``tol`` or, when a candidate ``limit`` is known, if the common value
    misses it.

    The default tail ``(10**6, 10**6 + 1)`` sees both parities.  Slowly
    decaying offsets are still far from ``theta`` at that ``n``; add small
    exponents only when the limit needs them (jumps smoothed at rate
    ``sqrt(gamma_n)``).  For a limit with nonzero slope ``tol`` has to
    absorb slope times the offset ``n**-alpha`` left at the tail.
    """
    if isinstance(family, str):
        label = name or family
        if limit is None:
            limit = _NAMED_LIMITS.get(family)
        fn = epi_family(family)
    else:
        label = name or "family"
        fn = family
    ns = np.asarray(sorted(n_list), dtype=float)
    tail_ns = ns[-tail:]
    violations = 0
    worst = -np.inf
    rows = []
    for theta in np.atleast_1d(np.asarray(theta_grid, dtype=float)):
        seqs = [np.full(tail_ns.shape, theta)]
        for a in exponents:
            seqs.append(theta + tail_ns**-a)
            seqs.append(theta - tail_ns**-a)
        vals = np.array([[float(np.atleast_1d(fn(int(n), np.array([t])))[0]) for n, t in zip(tail_ns, s)]
                         for s in seqs])
        lower = float(vals.min())
        upper = float(vals.max(axis=1).min())
        gap = upper - lower
        ok = gap <= tol
        target = None
        if limit is not None:
            target = float(limit(theta))
            miss = max(abs(upper - target), abs(lower - target))
            ok = ok and miss <= tol
            gap = max(gap, miss)
        worst = max(worst, gap - tol)
        violations += not ok
        rows.append({"theta": float(theta), "lower": lower, "upper": upper,
                     "limit": upper if gap <= tol else None, "candidate": target})
    return ConditionReport(f"epi[{label}]", len(rows), violations, float(worst),
                           {"tol": tol, "n_tail": tail_ns.tolist(), "points": rows})


# -- suites ------------------------------------------------------------------

SUITES = ("descent", "gradient", "schedule", "epi")


def run_suite(suite: str, *, seed: int = 0, beta: float = 0.4, dim: int = 1,
              n_max: int = 10**6, particles: int = 2**14, trials: int = 100
              ) -> List[Tuple[ConditionReport, bool]]:
    """Run one named suite; returns ``(report, expected_pass)`` pairs."""
    out: List[Tuple[ConditionReport, bool]] = []
    if suite == "descent":
        out.append((check_descent_lemma(catalog("quadratic", dim), 0.5, trials=10 * trials,
                                        seed=seed, exact=True), True))
        for name in ("step", "staircase"):
            out.append((check_descent_lemma(catalog(name, dim), 0.5, trials=trials, seed=seed,
                                            particles=particles), True))
    elif suite == "gradient":
        out.append((check_gradient_equivalence(catalog("quadratic", 1), [-2.0, 0.0, 2.0], 0.5,
                                               seed, particles=particles), True))
        out.append((check_gradient_equivalence(catalog("constant", 1, value=1.0), [-1.0, 0.0, 1.0],
                                               1.0, seed, particles=particles), True))
        out.append((check_gradient_equivalence(catalog("step", 1), [0.5], 0.1, seed,
                                               particles=particles), True))
    elif suite == "schedule":
        out.append((check_schedule_condition(beta, dim, n_max), True))
    elif suite == "epi":
        out.append((probe_epi_convergence("epi_neg"), True))
        out.append((probe_epi_convergence("epi_pos"), True))
        out.append((probe_epi_convergence("epi_alt"), False))
        for name, exps in (("quadratic", DEFAULT_EXPONENTS), ("step", (0.125,) + DEFAULT_EXPONENTS)):
            obj = catalog(name, 1)
            out.append((probe_epi_convergence(laplace_family(obj, beta), limit=lambda t, o=obj: o(t),
                                              tol=5e-2, exponents=exps, name=f"laplace:{name}"), True))
    else:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or 'all'")
    return out
