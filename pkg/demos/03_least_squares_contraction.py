"""Closed-form iteration maps for least squares.

For Gaussian responses a CEASE step is an affine map whose contraction in the
pooled second-moment metric can be computed exactly.  The table shows how the
proximal weight trades per-step progress for robustness when local samples
are small, and that averaging over machines always helps.
"""

import numpy as np

from cease import GAUSSIAN, Cluster, Shard
from cease.quadratic import QuadState, spectral_contraction

rng = np.random.default_rng(0)
p, m = 20, 8
for n in (40, 100, 400):
    shards = []
    for _ in range(m):
        X = np.c_[np.ones(n), rng.standard_normal((n, p))]
        shards.append(Shard(X, X @ np.ones(p + 1) + rng.standard_normal(n)))
    q = QuadState.from_cluster(Cluster(shards, GAUSSIAN))
    print(f"n = {n}")
    for alpha in (0.0, 0.1, 0.5, 2.0):
        single = spectral_contraction(q, alpha, averaging=False)
        avg = spectral_contraction(q, alpha, averaging=True)
        print(f"  alpha={alpha:4.1f}  single {single:7.3f}   averaged {avg:6.3f}")
