"""A function that differs from its smoothing on a null set.

The objective equals 1 everywhere except on the diagonal, where it is 0.
Particles never land there, so the smoothed value stays 1 and the mean barely
moves, even though the infimum is 0.

Run:  python demos/02_counterexample.py
"""
import numpy as np

from gfopt import catalog
from gfopt.kernels import KernelState
from gfopt.optimizer import gaussian_config, step_deterministic

obj = catalog("counterexample_diag", 2)
cfg = gaussian_config(2, particles=2**13)
state = KernelState(np.array([0.4, -1.1]), 1.0)
for n in range(5):
    res = step_deterministic(state, obj, cfg, n)
    drift = np.abs(res.state.theta - state.theta).max()
    print(f"step {n}: h = {res.record.h!r}, drift = {drift:.2e}")
    state = res.state
