"""Distributed logistic regression on the dense simulated design.

Ten thousand observations with 100 covariates are split over m machines.
Each method starts at zero and the optimization error ||theta_t - theta_hat||
is printed on a log scale next to the statistical error ||theta_hat - theta*||.
Run with ``python3 demos/01_dense_logistic.py``.
"""

import numpy as np

from cease import AlgoConfig, global_minimizer, run
from cease.data import SyntheticSpec, generate, partition

bundle = generate(SyntheticSpec(seed=0))
theta_hat = None

for m in (5, 10, 40):
    cluster = partition(bundle, m)
    if theta_hat is None:
        theta_hat = global_minimizer(cluster)
        stat = np.linalg.norm(theta_hat - bundle.theta_star)
        print(f"statistical error log||theta_hat - theta*|| = {np.log(stat):.2f}\n")
    alpha = 0.15 * cluster.p / cluster.n
    print(f"n = {cluster.n:.0f}, m = {m}, alpha = {alpha:.4f}")
    for variant in ("CSL", "GEL", "CEASE", "CEASE_AVG"):
        try:
            errs = run(cluster, AlgoConfig(variant, alpha, T=15)).errors(theta_hat)
        except Exception as exc:  # small local samples can break the unregularized solvers
            print(f"  {variant:9s} failed: {exc}")
            continue
        with np.errstate(divide="ignore"):
            path = " ".join(f"{v:6.1f}" for v in np.log(errs[::3]))
        print(f"  {variant:9s} log error at t=0,3,..,15: {path}")
    print()
