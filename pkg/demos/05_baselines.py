"""Consensus ADMM and accelerated gradient against CEASE, per iteration.

All three start at zero on the same partition; errors are printed every five
iterations together with the number of vectors exchanged so far.
"""

import numpy as np

from cease import AdmmConfig, AgdConfig, AlgoConfig, global_minimizer, run, run_admm, run_agd
from cease.data import SyntheticSpec, generate, partition

cluster = partition(generate(SyntheticSpec(seed=3)), 10)
theta_hat = global_minimizer(cluster)
alpha = 0.15 * cluster.p / cluster.n

traces = {
    "CEASE_AVG": run(cluster, AlgoConfig("CEASE_AVG", alpha, T=30)),
    "CEASE": run(cluster, AlgoConfig("CEASE", alpha, T=30)),
    "ADMM": run_admm(cluster, AdmmConfig(T=30)),
    "AGD": run_agd(cluster, AgdConfig(T=30)),
}
for name, tr in traces.items():
    errs = np.log(tr.errors(theta_hat))[::5]
    sent = np.cumsum(tr.vectors_sent)[-1]
    print(f"{name:9s} " + " ".join(f"{e:6.1f}" for e in errs) + f"   vectors sent: {sent}")
