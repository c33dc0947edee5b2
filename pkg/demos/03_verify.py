"""Run every theory check and print the reports.

The alternating bump family is included on purpose: it has no epi-limit, so
its probe is expected to fail.

Run:  python demos/03_verify.py
"""
from gfopt.verify import SUITES, run_suite

for suite in SUITES:
    print(f"== {suite}")
    for rep, expected in run_suite(suite, seed=0):
        note = "" if rep.passed == expected else "   <-- unexpected"
        print(f"  {rep}{'' if expected else '  (expected to fail)'}{note}")
