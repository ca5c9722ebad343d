"""Homogeneity, curvature and the contraction factor they predict.

delta_hat measures how far local Hessians are from the pooled Hessian; it
shrinks as local samples grow.  The plug-in factor is printed next to the
rate actually observed in a run of the averaged method.
"""

from cease import (AlgoConfig, contraction_report, default_alpha, estimate_delta, estimate_rho,
                   global_minimizer, run)
from cease.data import SyntheticSpec, generate, partition

bundle = generate(SyntheticSpec(seed=2))
theta_hat = None
for m in (5, 10, 40):
    c = partition(bundle, m)
    theta_hat = global_minimizer(c) if theta_hat is None else theta_hat
    hom = estimate_delta(c, theta_hat)
    curv = estimate_rho(c, theta_hat)
    alpha = default_alpha(c, "scaled", 0.15)
    rep = contraction_report(run(c, AlgoConfig("CEASE_AVG", alpha, T=20)), theta_hat,
                             delta=hom.delta, rho=curv.rho, rho0=curv.rho0, alpha=alpha)
    print(f"n={c.n:5.0f}  delta={hom.delta:.4f}  rho={curv.rho:.4f}  rho0={curv.rho0:.4f}  "
          f"kappa={curv.kappa:6.1f}  alpha(delta^2/rho)={hom.delta ** 2 / curv.rho:.4f}")
    print(f"         observed rate {rep.rate:.3f}, plug-in factor {rep.theoretical:.3f}, "
          f"sufficient condition met: {rep.condition_met}")
