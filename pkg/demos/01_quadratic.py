"""Minimise a two-dimensional quadratic and watch the kernel mean contract.

Run:  python demos/01_quadratic.py
"""
import numpy as np

from gfopt import catalog
from gfopt.optimizer import Schedule, gaussian_config, run

obj = catalog("quadratic", 2)
cfg = gaussian_config(2, particles=128, iterations=2000, seed=0, schedule=Schedule(beta=0.4))

checkpoints = {1, 10, 100, 1000, 2000}
seen = []


def report(rec):
    seen.append(rec)
    if len(seen) in checkpoints:
        print(f"iter {len(seen):5d}  theta={np.round(rec.theta, 4)}  gamma={rec.gamma:.4f}  h={rec.h:.5f}")


result = run(cfg, obj, [3.0, -2.0], callback=report)
print("output point:", result.output_point)
print("distance to the minimiser:", float(np.linalg.norm(result.output_point)))
