"""AUC empirical risk minimisation.

The risk of a linear score ``s_x(z) = x @ z`` is the fraction of ordered
pairs whose scores disagree with their labels::

    R(x) = 1/(n(n-1)) * sum_{i != j} 1{(s_i - s_j)(y_i - y_j) < 0}

Only pairs with different labels can contribute, and each unordered
positive/negative pair is counted twice, so ``R(x) = 2 D / (n(n-1))`` with
``D = #{(i, j) : y_i = +1, y_j = -1, s_i < s_j}``.  Score ties never count.
The mini-batch estimator samples positive/negative pairs uniformly and
counts the same strict inequality, so both conventions agree on ties.
"""

from __future__ import annotations

import csv
import enum
import json
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from . import qmc
from .errors import DegenerateColumnWarning, ParseError, SingleClassError
from .objectives import NoiseSource, ObjectiveHandle
from .optimizer import OptimizerConfig, Schedule, gaussian_config, run


@dataclass(frozen=True)
class Dataset:
    """Standardised features with labels in ``{-1, +1}``, positives first."""

    features: np.ndarray
    labels: np.ndarray
    n_plus: int
    n_minus: int
    name: str = "data"
    label_map: Optional[dict] = None  # raw label -> +/-1 when strings were mapped
    dropped_columns: Tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def positives(self) -> np.ndarray:
        return self.features[: self.n_plus]

    @property
    def negatives(self) -> np.ndarray:
        return self.features[self.n_plus:]


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _map_labels(raw: Sequence[str]):
    distinct = list(dict.fromkeys(raw))
    if len(distinct) > 2:
        raise ParseError(f"label column has {len(distinct)} distinct values, expected 2")
    if all(_is_number(v) for v in distinct):
        values = {float(v) for v in distinct}
        if values <= {0.0, 1.0} or values <= {-1.0, 1.0}:
            return np.array([1.0 if float(v) == 1.0 else -1.0 for v in raw]), None
    if len(distinct) < 2:
        raise SingleClassError(f"only one class present: {distinct[0]!r}")
    mapping = {distinct[0]: 1.0, distinct[1]: -1.0}
    return np.array([mapping[v] for v in raw]), mapping


def standardize(features: np.ndarray, labels: np.ndarray, name: str = "data",
                label_map=None) -> Dataset:
    """Centre and scale columns (population variance), drop constant ones, sort positives first."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ParseError("features must be (n, p) with one label per row")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ParseError("labels must be -1 or +1")
    n_plus = int(np.sum(y > 0))
    if n_plus in (0, y.shape[0]):
        raise SingleClassError("only one class present")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.maximum(np.abs(mean), 1.0)
    keep = std > 1e-12 * scale
    dropped = tuple(int(j) for j in np.flatnonzero(~keep))
    for j in dropped:
        warnings.warn(f"column {j} has zero variance and was dropped", DegenerateColumnWarning, stacklevel=2)
    Z = (X[:, keep] - mean[keep]) / std[keep]
    order = np.argsort(-y, kind="stable")
    return Dataset(Z[order], y[order], n_plus, int(y.shape[0]) - n_plus, name, label_map, dropped)


def load_csv_standardize(path: Union[str, Path], label_column: Union[int, str] = -1) -> Dataset:
    """Read a numeric CSV with one binary label column.

    ``label_column`` is a column index (negative counts from the end) or a
    header name.  A header row is detected when a feature cell of the first
    row is not numeric.  Labels may be ``{0, 1}``, ``{-1, 1}`` or any two
    strings; strings map to ``+1`` for the first one seen.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0][1])
    header = None
    if isinstance(label_column, str):
        header = [c.strip() for c in rows[0][1]]
        if label_column not in header:
            raise ParseError(f"{path}: no column named {label_column!r}")
        col = header.index(label_column)
        rows = rows[1:]
    else:
        col = label_column % width if -width <= label_column < width else None
        if col is None:
            raise ParseError(f"{path}: label column {label_column} out of range for {width} columns")
        first = [c.strip() for j, c in enumerate(rows[0][1]) if j != col]
        if not all(_is_number(c) for c in first):
            header = [c.strip() for c in rows[0][1]]
            rows = rows[1:]
    feats, raw = [], []
    for line, r in rows:
        if len(r) != width:
            raise ParseError(f"{path}:{line}: expected {width} fields, got {len(r)}")
        try:
            feats.append([float(c) for j, c in enumerate(r) if j != col])
        except ValueError:
            raise ParseError(f"{path}:{line}: non-numeric feature value") from None
        raw.append(r[col].strip())
    if not feats:
        raise ParseError(f"{path}: no data rows")
    labels, mapping = _map_labels(raw)
    return standardize(np.array(feats), labels, path.stem, mapping)


# -- risks -------------------------------------------------------------------


def _discordant(pos_scores: np.ndarray, neg_scores: np.ndarray) -> int:
    srt = np.sort(pos_scores)
    return int(np.searchsorted(srt, neg_scores, side="left").sum())


def _ordered_pairs(data: Dataset) -> int:
    return data.n * (data.n - 1)


def auc_risk(x, data: Dataset) -> float:
    s = data.features @ np.asarray(x, dtype=float)
    # integer numerator: matches the literal double sum exactly
    return 2 * _discordant(s[: data.n_plus], s[data.n_plus:]) / _ordered_pairs(data)


def auc_risk_batch(X, data: Dataset) -> np.ndarray:
    """``auc_risk`` for each row of ``X``."""
    S = data.features @ np.atleast_2d(np.asarray(X, dtype=float)).T
    pos, neg = S[: data.n_plus], S[data.n_plus:]
    per_col = data.n_plus * data.n_minus
    if per_col > 1 << 16:
        counts = [_discordant(pos[:, k], neg[:, k]) for k in range(S.shape[1])]
    else:
        # direct pair comparison in blocks of columns, cheaper than sorting for small sets
        block = max(1, (1 << 22) // per_col)
        counts = np.concatenate([np.sum(pos[:, None, k:k + block] < neg[None, :, k:k + block], axis=(0, 1))
                                 for k in range(0, S.shape[1], block)])
    return 2 * np.asarray(counts, dtype=np.int64) / _ordered_pairs(data)


def draw_pairs(data: Dataset, n_batch: int, rng: np.random.Generator):
    """``n_batch`` (positive, negative) row indices, uniform over the product set."""
    if n_batch < 1:
        raise ValueError("n_batch must be >= 1")
    return rng.integers(0, data.n_plus, n_batch), data.n_plus + rng.integers(0, data.n_minus, n_batch)


def _minibatch_from_scores(S, data: Dataset, pairs) -> np.ndarray:
    I, J = pairs
    hits = np.sum(S[I] < S[J], axis=0)
    return 2.0 * data.n_plus * data.n_minus / (len(I) * _ordered_pairs(data)) * hits


def auc_risk_minibatch(x, data: Dataset, n_batch: int, noise: NoiseSource, pairs=None) -> float:
    """Unbiased estimate of ``auc_risk`` from ``n_batch`` sampled pairs.

    ``pairs`` overrides sampling with explicit ``(I, J)`` index arrays; with
    every positive/negative pair listed once the estimate is exact.
    """
    if pairs is None:
        pairs = draw_pairs(data, n_batch, noise.rng())
    s = data.features @ np.asarray(x, dtype=float)
    return float(_minibatch_from_scores(s, data, pairs))


def all_pairs(data: Dataset):
    I, J = np.meshgrid(np.arange(data.n_plus), data.n_plus + np.arange(data.n_minus), indexing="ij")
    return I.ravel(), J.ravel()


def score_ties(x, data: Dataset) -> int:
    """Number of positive/negative pairs with equal scores (they never count as discordant)."""
    s = data.features @ np.asarray(x, dtype=float)
    srt = np.sort(s[: data.n_plus])
    neg = s[data.n_plus:]
    return int((np.searchsorted(srt, neg, "right") - np.searchsorted(srt, neg, "left")).sum())


def auc_objective(data: Dataset, n_batch: Optional[int] = None) -> ObjectiveHandle:
    """The risk as an objective on ``R^p``; noisy (pair-sampling) when ``n_batch`` is given.

    ``params["pair_evaluations"]`` counts score comparisons: ``n(n-1)`` per
    point for the exact risk, ``n_batch`` per point for the mini-batch one.
    """
    counter = {"pair_evaluations": 0}

    def exact(X):
        counter["pair_evaluations"] += X.shape[0] * data.n * (data.n - 1)
        return auc_risk_batch(X, data)

    if n_batch is None:
        return ObjectiveHandle("auc", data.p, exact, lower_bound_hint=0.0, params=counter)

    def noisy(X, pairs):
        counter["pair_evaluations"] += X.shape[0] * len(pairs[0])
        return _minibatch_from_scores(data.features @ X.T, data, pairs)

    return ObjectiveHandle("auc_batch", data.p, exact, noisy_func=noisy,
                           draw=lambda rng: draw_pairs(data, n_batch, rng),
                           lower_bound_hint=0.0, params=counter)


# -- baseline ----------------------------------------------------------------


def random_start(dim: int, seed: int) -> np.ndarray:
    """Standard normal start; the (measure-zero) near-zero vector is redrawn since it scores every pair as a tie."""
    rng = np.random.Generator(np.random.PCG64(qmc.seed_sequence(seed, 3)))
    while True:
        x0 = rng.standard_normal(dim)
        if np.linalg.norm(x0) >= 1e-6:
            return x0


def nelder_mead(obj: ObjectiveHandle, x0=None, max_iters: int = 1000, seed: int = 0, callback=None):
    """Simplex search from ``x0`` (random when None); returns ``(x_best, f_best, iterations)``.

    Standard coefficients, initial simplex ``x0 + 0.5 e_j``, stop at
    ``max_iters`` or when every vertex is within ``1e-8`` of the best one.
    """
    x0 = random_start(obj.dim, seed) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    simplex = np.vstack([x0, x0 + 0.5 * np.eye(obj.dim)])
    res = optimize.minimize(
        lambda x: float(obj.func(x[None, :])[0]), x0, method="Nelder-Mead", callback=callback,
        options={"initial_simplex": simplex, "maxiter": int(max_iters), "maxfev": 10**12,
                 "xatol": 1e-8, "fatol": np.inf, "adaptive": False},
    )
    return res.x, float(res.fun), int(res.nit)


# -- benchmark ---------------------------------------------------------------


class Method(str, enum.Enum):
    EXACT = "exact"
    BATCH = "batch"
    NELDER_MEAD = "nelder-mead"


def normalize_direction(theta) -> np.ndarray:
    """``theta / |theta|``; the zero vector maps to itself.

    The sign is kept: the risk of ``-theta`` is the complement of the risk
    of ``theta``, so flipping it would report a different classifier.
    """
    theta = np.asarray(theta, dtype=float)
    norm = np.linalg.norm(theta)
    return theta / norm if norm > 0 else theta.copy()


@dataclass
class BenchmarkResult:
    records: List[dict] = field(default_factory=list)
    traces: List[List[dict]] = field(default_factory=list)

    @property
    def final_risks(self) -> np.ndarray:
        return np.array([r["final_risk"] for r in self.records])

    def median(self) -> float:
        return float(np.median(self.final_risks))

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")

    def write_traces(self, directory) -> List[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for rec, trace in zip(self.records, self.traces):
            p = directory / f"{rec['dataset']}-{rec['method']}-seed{rec['seed']}.jsonl"
            with p.open("w") as fh:
                for row in trace:
                    fh.write(json.dumps(row) + "\n")
            paths.append(p)
        return paths


def run_benchmark(data: Dataset, method: Union[Method, str], runs: int = 10,
                  config: Optional[OptimizerConfig] = None, *, iterations: int = 1000,
                  batch_size: int = 500, seeds: Optional[Sequence[int]] = None) -> BenchmarkResult:
    """Repeat one method over seeds ``0..runs-1`` (or ``seeds``).

    Particle runs start from the same random point as the simplex baseline
    for the same seed.  ``config`` overrides the default Gaussian
    configuration (128 particles, ``beta = 0.4``, adaptive ``lam``); its seed
    is replaced per run.
    """
    method = Method(method)
    seeds = list(range(runs)) if seeds is None else list(seeds)
    if config is None:
        config = gaussian_config(data.p, schedule=Schedule(beta=0.4), particles=128, iterations=iterations)
    result = BenchmarkResult()
    for seed in seeds:
        x0 = random_start(data.p, seed)
        trace: List[dict] = []
        t0 = time.perf_counter()
        if method is Method.NELDER_MEAD:
            obj = auc_objective(data)

            def cb(xk, trace=trace):
                trace.append({"n": len(trace), "theta": xk.tolist(),
                              "direction": normalize_direction(xk).tolist(),
                              "value": auc_risk(xk, data)})

            x, _, n_iter = nelder_mead(obj, x0, config.iterations, seed, callback=cb)
        else:
            obj = auc_objective(data, batch_size if method is Method.BATCH else None)
            cfg = replace(config, seed=seed)

            def cb(rec, trace=trace):
                row = rec.to_dict()
                row["direction"] = normalize_direction(rec.theta).tolist()
                trace.append(row)

            out = run(cfg, obj, x0, callback=cb)
            x, n_iter = out.output_point, cfg.iterations
        wall_ms = 1000.0 * (time.perf_counter() - t0)
        result.records.append({
            "dataset": data.name, "method": method.value, "seed": int(seed),
            "final_risk": auc_risk(x, data), "iterations": int(n_iter), "wall_ms": round(wall_ms, 3),
        })
        result.traces.append(trace)
    return result


def running_direction_variance(trace: Sequence[dict], last: int = 100) -> float:
    """Total variance of the normalised running estimate over the last ``last`` iterations."""
    D = np.array([row["direction"] for row in trace[-last:]])
    return float(np.sum(np.var(D, axis=0)))
