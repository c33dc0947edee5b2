"""Command line: ``gfopt optimize | verify | auc``.

Exit codes: 0 success, 1 configuration or input error, 2 numeric abort
(``verify`` also returns 2 when a check does not meet its expectation).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import auc, verify
from .errors import GfoptError, RunAborted
from .kernels import Family, KernelSpec
from .objectives import catalog
from .optimizer import OptimizerConfig, Schedule, run

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TRACE_FIELDS = ("n", "theta", "gamma", "lambda", "h", "best_value", "best_point", "min_l", "max_l")
TRACE_HEADER = {"schema": "gfopt.trace", "version": 1, "fields": list(TRACE_FIELDS)}

DEFAULTS = {
    "objective": "quadratic",
    "dim": 1,
    "kernel": "gaussian",
    "particles": 128,
    "iterations": 1000,
    "beta": 0.4,
    "lambda_mode": "always",
    "lambda_init": 1.0,
    "seed": 0,
    "rqmc": "sobol",
    "trace_path": None,
    "batch_size": None,
    "theta0": None,   # defaults to the all-ones vector
    "data": None,     # CSV for objective = "auc"
    "label_column": -1,
}


class ConfigError(GfoptError, ValueError):
    pass


def load_config_file(path) -> dict:
    """TOML, or JSON when the file name ends in ``.json``; unknown keys are rejected."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r} in {path}")
    return cfg


def resolve_settings(args) -> dict:
    """Defaults, then ``OPT_SEED``, then the config file, then flags."""
    settings = dict(DEFAULTS)
    env_seed = os.environ.get("OPT_SEED")
    if env_seed is not None:
        try:
            settings["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"OPT_SEED must be an integer, got {env_seed!r}") from None
    if args.config:
        settings.update(load_config_file(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


def _build(settings):
    try:
        dim = int(settings["dim"])
        family = Family(settings["kernel"])
    except ValueError as exc:
        raise ConfigError(f"invalid kernel or dim: {exc}") from None
    name = settings["objective"]
    if name == "auc":
        if not settings["data"]:
            raise ConfigError("objective 'auc' needs key 'data'")
        data = auc.load_csv_standardize(settings["data"], settings["label_column"])
        dim = data.p
        obj = auc.auc_objective(data, settings["batch_size"])
    else:
        obj = catalog(name, dim)
    theta0 = settings["theta0"]
    theta0 = np.ones(dim) if theta0 is None else np.broadcast_to(np.asarray(theta0, float), (dim,)).copy()
    config = OptimizerConfig(
        kernel=KernelSpec(family, dim),
        schedule=Schedule(beta=float(settings["beta"]), lambda_mode=settings["lambda_mode"],
                          lambda_init=float(settings["lambda_init"])),
        particles=int(settings["particles"]), iterations=int(settings["iterations"]),
        seed=int(settings["seed"]), rqmc_mode=settings["rqmc"],
        batch_size=settings["batch_size"],
    )
    return config, obj, theta0


def write_trace(path, trace) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(TRACE_HEADER) + "\n")
        for rec in trace:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def cmd_optimize(args) -> int:
    try:
        settings = resolve_settings(args)
        config, obj, theta0 = _build(settings)
    except (GfoptError, ValueError, KeyError, OSError) as exc:
        print(f"error: {_message(exc)}", file=sys.stderr)
        return 1
    try:
        result = run(config, obj, theta0)
    except RunAborted as exc:
        if settings["trace_path"]:
            write_trace(settings["trace_path"], exc.trace)
        print(f"aborted: {exc}", file=sys.stderr)
        return 2
    if settings["trace_path"]:
        write_trace(settings["trace_path"], result.trace)
    best = result.trace[-1].best_value if result.trace else float("nan")
    print("output_point: " + " ".join(f"{v:.10g}" for v in result.output_point))
    print(f"best_value: {best:.10g}")
    return 0


def cmd_verify(args) -> int:
    suites = verify.SUITES if args.suite == "all" else (args.suite,)
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("OPT_SEED", 0))
    outcomes = []
    for suite in suites:
        outcomes += verify.run_suite(suite, seed=seed, beta=args.beta, dim=args.dim, n_max=args.n_max,
                                     particles=args.particles, trials=args.trials)
    ok = True
    for report, expected in outcomes:
        note = "" if expected else " (expected to fail)"
        met = report.passed == expected
        ok &= met
        print(f"{report}{note}{'' if met else '  <-- unexpected'}")
    if args.out:
        with open(args.out, "w") as fh:
            verify.write_reports([r for r, _ in outcomes], fh)
    print("suite: " + ("PASS" if ok else "FAIL"))
    return 0 if ok else 2


def cmd_auc(args) -> int:
    try:
        data = auc.load_csv_standardize(args.data, args.label_column)
    except (GfoptError, OSError) as exc:
        print(f"error: {_message(exc)}", file=sys.stderr)
        return 1
    seed0 = args.seed if args.seed is not None else int(os.environ.get("OPT_SEED", 0))
    config = OptimizerConfig(
        kernel=KernelSpec(Family.GAUSSIAN, data.p),
        schedule=Schedule(beta=args.beta, lambda_mode=args.lambda_mode),
        particles=args.particles, iterations=args.iters,
    )
    try:
        result = auc.run_benchmark(data, args.method, config=config, batch_size=args.batch_size,
                                   seeds=range(seed0, seed0 + args.runs))
    except RunAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2
    if args.out:
        result.write_jsonl(args.out)
    if args.trace_dir:
        result.write_traces(args.trace_dir)
    for rec in result.records:
        print(json.dumps(rec))
    print(f"median final risk: {result.median():.6g}")
    return 0


def _message(exc) -> str:
    # KeyError subclasses repr their message
    return exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gfopt", description="Gradient-free optimisation by Bayes updates and moment matching.")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("optimize", help="run the optimiser on a catalog objective")
    o.add_argument("--config", help="TOML or JSON file with run settings")
    o.add_argument("--objective")
    o.add_argument("--dim", type=int)
    o.add_argument("--kernel", choices=[f.value for f in Family])
    o.add_argument("--particles", type=int)
    o.add_argument("--iters", dest="iterations", type=int)
    o.add_argument("--beta", type=float)
    o.add_argument("--lambda-mode", dest="lambda_mode", choices=["fixed", "first-k", "always"])
    o.add_argument("--lambda-init", dest="lambda_init", type=float)
    o.add_argument("--seed", type=int)
    o.add_argument("--rqmc", choices=["sobol", "pseudo"])
    o.add_argument("--trace", dest="trace_path")
    o.add_argument("--batch-size", dest="batch_size", type=int)
    o.add_argument("--theta0", type=float, nargs="+")
    o.add_argument("--data", help="CSV file, for --objective auc")
    o.add_argument("--label-column", dest="label_column", type=_column)
    o.set_defaults(func=cmd_optimize)

    v = sub.add_parser("verify", help="run numerical checks of the convergence conditions")
    v.add_argument("--suite", choices=list(verify.SUITES) + ["all"], default="all")
    v.add_argument("--seed", type=int)
    v.add_argument("--beta", type=float, default=0.4)
    v.add_argument("--dim", type=int, default=1)
    v.add_argument("--n-max", dest="n_max", type=int, default=10**6)
    v.add_argument("--particles", type=int, default=2**14)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--out", help="write reports as JSON lines")
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("auc", help="AUC risk minimisation benchmark")
    a.add_argument("--data", required=True)
    a.add_argument("--label-column", dest="label_column", type=_column, default=-1)
    a.add_argument("--method", choices=[m.value for m in auc.Method], default="exact")
    a.add_argument("--runs", type=int, default=10)
    a.add_argument("--iters", type=int, default=1000)
    a.add_argument("--batch-size", dest="batch_size", type=int, default=500)
    a.add_argument("--particles", type=int, default=128)
    a.add_argument("--beta", type=float, default=0.4)
    a.add_argument("--lambda-mode", dest="lambda_mode", choices=["fixed", "first-k", "always"], default="always")
    a.add_argument("--seed", type=int, help="first seed; runs use seed, seed+1, ...")
    a.add_argument("--out", help="JSON lines file, one record per run")
    a.add_argument("--trace-dir", dest="trace_dir")
    a.set_defaults(func=cmd_auc)
    return p


def _column(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
