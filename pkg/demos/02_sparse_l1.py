"""L1-penalized logistic regression with 1000 covariates and 10 active ones.

With a local sample of 250 the unregularized single-solver iteration has no
well-posed local problem, while the proximal term keeps every local solve
bounded.  Expect the first line to report a failure and the others to reach
the centralized lasso solution.
"""

import math

import numpy as np

from cease import AlgoConfig, ConvergenceError, Penalty, global_minimizer, run
from cease.data import SyntheticSpec, generate, partition

bundle = generate(SyntheticSpec("logistic_sparse_l1", seed=1))
lam = 0.5 * math.sqrt(math.log(bundle.p) / bundle.n_train)
cluster = partition(bundle, 20, penalty=Penalty.l1(lam))
theta_hat = global_minimizer(cluster)
print(f"lambda = {lam:.4f}; central solution has {np.count_nonzero(theta_hat)} nonzeros")

alpha = 0.05 * cluster.p / cluster.n
for variant, a in (("CEASE", 0.0), ("CEASE", alpha), ("CEASE_AVG", alpha)):
    try:
        errs = run(cluster, AlgoConfig(variant, a, T=20)).errors(theta_hat)
    except ConvergenceError as exc:
        print(f"{variant:9s} alpha={a:.3f}: {exc}")
        continue
    hit = np.flatnonzero(errs <= 1e-3)
    when = f"reaches 1e-3 at t={hit[0]}" if hit.size else f"error {errs[-1]:.2e} after 20"
    print(f"{variant:9s} alpha={a:.3f}: {when}")
