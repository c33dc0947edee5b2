"""Objective functions, deterministic and noisy.

Evaluators are vectorised: they take an ``(N, d)`` array of points and return
``N`` values.  A noisy objective ``ell(x, U)`` also carries its mean
``l(x) = E[ell(x, U)]`` and a sampler for ``U``; one draw of ``U`` is shared
by every point passed in a single call.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .errors import DimensionError, NonFiniteError, UnknownNameError
from .qmc import seed_sequence


class Kind(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    NOISY = "noisy"


@dataclass
class ObjectiveHandle:
    """A named objective on ``R^dim``.

    ``func`` is the deterministic objective (for noisy handles: its mean,
    when known).  ``noisy_func(X, U)`` evaluates ``ell`` for one noise draw
    ``U`` produced by ``draw(rng)``.  ``exact_h``, when present, returns the
    smoothed value ``h(theta, gamma, lam)`` in closed form.
    """

    name: str
    dim: int
    func: Optional[Callable[[np.ndarray], np.ndarray]]
    noisy_func: Optional[Callable[[np.ndarray, Any], np.ndarray]] = None
    draw: Optional[Callable[[np.random.Generator], Any]] = None
    lower_bound_hint: Optional[float] = None
    smooth: bool = False
    exact_h: Optional[Callable[[np.ndarray, float, float], float]] = None
    params: dict = field(default_factory=dict)
    evaluations: int = 0

    @property
    def kind(self) -> Kind:
        return Kind.NOISY if self.noisy_func is not None else Kind.DETERMINISTIC

    def __call__(self, x):
        return eval(self, x)


@dataclass(frozen=True)
class NoiseSource:
    """Noise draws keyed by ``(seed, draw_index)``; no shared stream state."""

    seed: int
    draw_index: int = 0

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(seed_sequence(self.seed, self.draw_index, 1)))

    def at(self, index: int) -> "NoiseSource":
        return NoiseSource(self.seed, index)

    def draw(self, obj: ObjectiveHandle):
        if obj.draw is None:
            raise ValueError(f"objective {obj.name!r} has no noise sampler")
        return obj.draw(self.rng())


def _as_batch(obj: ObjectiveHandle, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != obj.dim:
        raise DimensionError(f"{obj.name}: points have dimension {X.shape[1]}, expected {obj.dim}")
    return X


def _finite(values, name):
    values = np.asarray(values, dtype=float)
    if np.any(np.isnan(values)) or np.any(values == -np.inf):
        raise NonFiniteError(f"{name} returned a non-finite value")
    return values


def eval_batch(obj: ObjectiveHandle, X) -> np.ndarray:
    if obj.func is None:
        raise ValueError(f"objective {obj.name!r} has no closed-form mean")
    X = _as_batch(obj, X)
    obj.evaluations += X.shape[0]
    return _finite(obj.func(X), obj.name)


def eval_noisy_batch(obj: ObjectiveHandle, X, noise_draw) -> np.ndarray:
    X = _as_batch(obj, X)
    obj.evaluations += X.shape[0]
    return _finite(obj.noisy_func(X, noise_draw), obj.name)


def eval(obj: ObjectiveHandle, x) -> float:  # noqa: A001 - mirrors the math
    """``l(x)`` at a single point."""
    return float(eval_batch(obj, np.atleast_1d(x))[0])


def eval_noisy(obj: ObjectiveHandle, x, noise: NoiseSource) -> float:
    """``ell(x, U)`` for the draw indexed by ``noise``."""
    if obj.kind is not Kind.NOISY:
        raise ValueError(f"objective {obj.name!r} is deterministic")
    return float(eval_noisy_batch(obj, np.atleast_1d(x), noise.draw(obj))[0])


# -- catalog -----------------------------------------------------------------


def _quadratic_h(theta, gamma, lam):
    from .smoothing import closed_form_h_quadratic

    return closed_form_h_quadratic(theta, gamma, lam)[0]


def _quadratic(d, **_):
    return ObjectiveHandle(
        "quadratic", d, lambda X: 0.5 * np.sum(X * X, axis=1),
        lower_bound_hint=0.0, smooth=True, exact_h=_quadratic_h,
    )


def _shifted_quadratic(d, shift=None, **_):
    c = np.ones(d) if shift is None else np.broadcast_to(np.asarray(shift, float), (d,)).copy()

    def f(X):
        Z = X - c
        return 0.5 * np.sum(Z * Z, axis=1)

    return ObjectiveHandle("shifted_quadratic", d, f, lower_bound_hint=0.0, smooth=True,
                           params={"shift": c})


def _constant(d, value=0.0, **_):
    value = float(value)
    return ObjectiveHandle(
        "constant", d, lambda X: np.full(X.shape[0], value),
        lower_bound_hint=value, smooth=True,
        exact_h=lambda theta, gamma, lam: lam * value, params={"value": value},
    )


def _counterexample_diag(d, **_):
    if d != 2:
        raise DimensionError("counterexample_diag is defined on R^2")

    def f(X):
        on_diag = X[:, 0] == X[:, 1]
        return np.where(on_diag, np.minimum(1.0, np.abs(X[:, 0])), 1.0)

    # the diagonal is Lebesgue-null, so every Gaussian smoothing sees l == 1
    return ObjectiveHandle("counterexample_diag", 2, f, lower_bound_hint=0.0,
                           exact_h=lambda theta, gamma, lam: lam * 1.0)


def _staircase(d, floor=-3.0, **_):
    # ceil is lsc; clipping from below keeps it bounded
    floor = float(floor)
    return ObjectiveHandle("staircase", d, lambda X: np.sum(np.ceil(np.maximum(X, floor)), axis=1),
                           lower_bound_hint=d * np.ceil(floor), params={"floor": floor})


def _step(d, **_):
    return ObjectiveHandle("step", d, lambda X: np.sum(X > 0, axis=1).astype(float),
                           lower_bound_hint=0.0)


def _epi(sign_fn, name):
    def build(d, index=1, **_):
        n = int(index)
        s = sign_fn(n)
        return ObjectiveHandle(name, d, lambda X: s * np.exp(-n * np.sum(X * X, axis=1)),
                               lower_bound_hint=-1.0, smooth=True, params={"index": n})

    return build


EPI_FAMILIES = {
    "epi_pos": lambda n: 1.0,
    "epi_neg": lambda n: -1.0,
    "epi_alt": lambda n: -1.0 if n % 2 else 1.0,
}


def epi_family(name: str) -> Callable[[int, np.ndarray], np.ndarray]:
    """``f(n, theta)`` for the exponential bump families, vectorised in ``theta``."""
    try:
        sign = EPI_FAMILIES[name]
    except KeyError:
        raise UnknownNameError(name) from None
    return lambda n, theta: sign(n) * np.exp(-n * np.asarray(theta, float) ** 2)


def _probability_unif(d, **_):
    if d != 1:
        raise DimensionError("probability_unif is one-dimensional")
    return ObjectiveHandle(
        "probability_unif", 1,
        func=lambda X: -np.clip(-X[:, 0], 0.0, 1.0),
        noisy_func=lambda X, u: -(X[:, 0] + u < 0).astype(float),
        draw=lambda rng: rng.random(),
        lower_bound_hint=-1.0,
    )


def _noisy_quadratic(d, noise_scale=1.0, **_):
    sigma = float(noise_scale)
    return ObjectiveHandle(
        "noisy_quadratic", d,
        func=lambda X: 0.5 * np.sum(X * X, axis=1),
        noisy_func=lambda X, u: 0.5 * np.sum(X * X, axis=1) + sigma * u,
        draw=lambda rng: rng.standard_normal(),
        smooth=True, params={"noise_scale": sigma},
    )


_CATALOG = {
    "quadratic": _quadratic,
    "shifted_quadratic": _shifted_quadratic,
    "constant": _constant,
    "counterexample_diag": _counterexample_diag,
    "staircase": _staircase,
    "step": _step,
    "epi_pos": _epi(EPI_FAMILIES["epi_pos"], "epi_pos"),
    "epi_neg": _epi(EPI_FAMILIES["epi_neg"], "epi_neg"),
    "epi_alt": _epi(EPI_FAMILIES["epi_alt"], "epi_alt"),
    "probability_unif": _probability_unif,
    "noisy_quadratic": _noisy_quadratic,
}

NAMES = tuple(_CATALOG)


def catalog(name: str, d: int = 1, **params) -> ObjectiveHandle:
    """Build a named objective.

    Extra keyword parameters: ``shift`` (shifted_quadratic), ``value``
    (constant), ``floor`` (staircase), ``index`` (epi_*), ``noise_scale``
    (noisy_quadratic).
    """
    try:
        build = _CATALOG[name]
    except KeyError:
        raise UnknownNameError(f"unknown objective {name!r}; choose from {', '.join(NAMES)}") from None
    if int(d) < 1:
        raise DimensionError("dimension must be >= 1")
    return build(int(d), **params)
