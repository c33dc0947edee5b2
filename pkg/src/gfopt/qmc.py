"""Uniform point sets feeding the kernel samplers.

``generate`` returns a fresh batch for every ``(seed, index)`` pair, so an
optimiser that keys batches by its iteration counter draws independent
randomisations at every step while staying reproducible.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import DimensionError, DomainError

SOBOL_MAX_DIM = 21201
_LO = 2.0**-53
_HI = 1.0 - 2.0**-53
_MASK64 = (1 << 64) - 1


class Mode(str, enum.Enum):
    SOBOL = "sobol"
    PSEUDO = "pseudo"


@dataclass(frozen=True)
class UniformBatch:
    points: np.ndarray
    seed: int
    mode: Mode
    index: int = 0

    @property
    def shape(self):
        return self.points.shape


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    """Deterministic seed material for ``(seed, *key)``; negative seeds wrap mod 2**64."""
    return np.random.SeedSequence([int(seed) & _MASK64, *(int(k) & _MASK64 for k in key)])


def generate(mode, n: int, d: int, seed: int = 0, index: int = 0, *, scramble: bool = True) -> UniformBatch:
    """``n`` points in ``(0, 1)^d``.

    Sobol mode: first ``n`` points of the Sobol sequence, scrambled (linear
    matrix scramble plus digital shift) with randomness keyed by
    ``(seed, index)``.  With ``scramble=False`` the origin is skipped so the
    first point is ``(0.5, ..., 0.5)``.

    Pseudo mode: i.i.d. uniforms from a Philox counter-based generator keyed
    the same way.

    All entries are clamped to ``[2**-53, 1 - 2**-53]``.
    """
    mode = Mode(mode)
    n, d = int(n), int(d)
    if n < 1:
        raise DomainError("need at least one point")
    if d < 1:
        raise DimensionError("dimension must be >= 1")
    ss = seed_sequence(seed, index, 0)
    if mode is Mode.SOBOL:
        if d > SOBOL_MAX_DIM:
            raise DimensionError(f"Sobol tables support d <= {SOBOL_MAX_DIM}, got {d}")
        sampler = qmc.Sobol(d, scramble=scramble, rng=np.random.Generator(np.random.PCG64(ss)))
        if not scramble:
            sampler.fast_forward(1)
        with warnings.catch_warnings():
            # balance warning for n not a power of two
            warnings.simplefilter("ignore", UserWarning)
            pts = sampler.random(n)
    else:
        pts = np.random.Generator(np.random.Philox(ss)).random((n, d))
    np.clip(pts, _LO, _HI, out=pts)
    return UniformBatch(points=pts, seed=int(seed), mode=mode, index=int(index))
