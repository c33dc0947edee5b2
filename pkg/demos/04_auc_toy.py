"""Compare particle optimisers with Nelder-Mead on the bundled AUC toy data.

Run:  python demos/04_auc_toy.py
"""
from importlib import resources

from gfopt.auc import load_csv_standardize, run_benchmark

with resources.as_file(resources.files("gfopt") / "data" / "toy_auc.csv") as path:
    data = load_csv_standardize(path)
print(f"{data.name}: n={data.n} (+{data.n_plus}/-{data.n_minus}), p={data.p}")

for method in ("nelder-mead", "exact", "batch"):
    res = run_benchmark(data, method, runs=5, iterations=300, batch_size=200)
    risks = ", ".join(f"{r:.3f}" for r in res.final_risks)
    print(f"{method:12s} median={res.median():.4f}  runs=[{risks}]")
