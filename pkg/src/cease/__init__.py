"""Communication-efficient distributed estimation for regularized GLMs.

Gradient-enhanced surrogate losses (CSL, GEL) and their proximal-point
regularizations (CEASE, CEASE with averaging), run on an in-process
simulated cluster, plus the usual baselines and diagnostics.
"""

__version__ = "0.1.0"

from .model import (BERNOULLI, GAUSSIAN, GlmFamily, Penalty, Shard, gradient, hessian, loss,
                    prox_penalty)
from .solver import (ConvergenceError, SingularSystemError, SolverSettings, SurrogateProblem,
                     solve_nonsmooth, solve_quadratic_exact, solve_smooth)
from .engine import (AlgoConfig, Cluster, RunTrace, Variant, global_gradient, global_minimizer,
                     one_shot_average, run, step)
from .baselines import AdmmConfig, AgdConfig, run_admm, run_agd
from .diagnostics import contraction_report, default_alpha, estimate_delta, estimate_rho
from .data import SyntheticSpec, generate, load_spambase, partition, test_error

__all__ = [
    "BERNOULLI", "GAUSSIAN", "GlmFamily", "Penalty", "Shard", "gradient", "hessian", "loss",
    "prox_penalty", "ConvergenceError", "SingularSystemError", "SolverSettings",
    "SurrogateProblem", "solve_nonsmooth", "solve_quadratic_exact", "solve_smooth",
    "AlgoConfig", "Cluster", "RunTrace", "Variant", "global_gradient", "global_minimizer",
    "one_shot_average", "run", "step", "AdmmConfig", "AgdConfig", "run_admm", "run_agd",
    "contraction_report", "default_alpha", "estimate_delta", "estimate_rho", "SyntheticSpec",
    "generate", "load_spambase", "partition", "test_error",
]
