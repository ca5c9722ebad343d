"""Consensus ADMM and distributed Nesterov acceleration.

Both report through :class:`~cease.engine.RunTrace` under the engine's
vector-counting convention.  An ADMM iteration is a gather of local
solutions and a broadcast of the consensus variable (2 rounds, ``2m``
vectors).  An AGD iteration is a gather of local gradients and a broadcast
of the new point (1 round, ``2m`` vectors).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .engine import Cluster, RoundRecord, RunTrace, global_gradient, one_shot_average
from .model import prox_penalty
from .solver import ConvergenceError, SolverSettings, SurrogateProblem, solve


class StepSizeError(RuntimeError):
    """Accelerated gradient kept increasing the objective under a fixed step."""


def _start(cluster, init, settings):
    if isinstance(init, str):
        if init == "zero":
            return np.zeros(cluster.dim)
        if init == "average":
            return one_shot_average(cluster, settings)
        raise ValueError(f"unknown initialization {init!r}")
    return np.array(init, dtype=float)


@dataclass(frozen=True)
class AdmmConfig:
    rho: float = 1.0
    T: int = 100
    init: object = "zero"
    solver: SolverSettings = field(default_factory=SolverSettings)
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4
    stop_early: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("ADMM penalty parameter must be positive")
        if self.T < 0:
            raise ValueError("T must be nonnegative")


@dataclass
class AdmmTrace(RunTrace):
    primal_residuals: list = field(default_factory=list)
    dual_residuals: list = field(default_factory=list)
    local_iterates: list = field(default_factory=list)


def run_admm(cluster: Cluster, cfg: AdmmConfig | None = None) -> AdmmTrace:
    """Global-consensus ADMM on ``sum_k m w_k f_k(theta_k) + m g(z)`` s.t. ``theta_k = z``.

    Node update::

        theta_k = argmin m w_k f_k(theta) + <u_k, theta - z> + (rho/2)||theta - z||^2

    Center update: ``z = prox_{g/rho}(mean_k(theta_k + u_k / rho))``, then
    ``u_k += rho (theta_k - z)``.  The recorded iterate is ``z``.
    """
    cfg = cfg or AdmmConfig()
    m, d = cluster.m, cluster.dim
    z = _start(cluster, cfg.init, cfg.solver)
    thetas = np.tile(z, (m, 1))
    u = np.zeros((m, d))
    scale = m * cluster.weights
    trace = AdmmTrace()
    trace.record(z, RoundRecord(0, 0, np.zeros(0), np.zeros(0, dtype=int)))
    trace.primal_residuals.append(0.0)
    trace.dual_residuals.append(0.0)
    trace.local_iterates.append(thetas.copy())

    for t in range(cfg.T):
        start = time.perf_counter()
        res = np.zeros(m)
        iters = np.zeros(m, dtype=int)
        for k, shard in enumerate(cluster.shards):
            # divide the node objective by m w_k to land on the surrogate form
            prob = SurrogateProblem(shard, cluster.family, cluster.penalty.none(),
                                    -u[k] / scale[k], z, cfg.rho / scale[k])
            try:
                thetas[k], res[k], iters[k] = solve(prob, thetas[k], cfg.solver, full_output=True)
            except ConvergenceError as exc:
                exc.node, exc.iteration = k, t
                raise
        z_old = z
        z = prox_penalty(cluster.penalty, np.mean(thetas + u / cfg.rho, axis=0), 1.0 / cfg.rho)
        u += cfg.rho * (thetas - z)
        r_norm = float(np.linalg.norm(thetas - z))
        s_norm = float(cfg.rho * math.sqrt(m) * np.linalg.norm(z - z_old))
        trace.record(z, RoundRecord(2, 2 * m, res, iters, time.perf_counter() - start))
        trace.primal_residuals.append(r_norm)
        trace.dual_residuals.append(s_norm)
        trace.local_iterates.append(thetas.copy())
        if cfg.stop_early:
            eps_pri = math.sqrt(m * d) * cfg.eps_abs + cfg.eps_rel * max(
                np.linalg.norm(thetas), math.sqrt(m) * np.linalg.norm(z))
            eps_dual = math.sqrt(m * d) * cfg.eps_abs + cfg.eps_rel * np.linalg.norm(u)
            if r_norm <= eps_pri and s_norm <= eps_dual:
                break
    return trace


@dataclass(frozen=True)
class AgdConfig:
    """``step=None`` selects backtracking from ``1 / lambda_max(hessian(theta_0))``."""

    step: float | None = None
    T: int = 100
    init: object = "zero"
    solver: SolverSettings = field(default_factory=SolverSettings)
    shrink: float = 0.5
    patience: int = 50

    def __post_init__(self):
        if self.step is not None and not self.step > 0:
            raise ValueError("fixed step size must be positive")
        if self.T < 0:
            raise ValueError("T must be nonnegative")


def _top_eigenvalue(H, iters=100, tol=1e-9):
    v = np.full(H.shape[0], 1.0 / math.sqrt(H.shape[0]))
    lam = 0.0
    for _ in range(iters):
        w = H @ v
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - lam) <= tol * new:
            return new
        lam = new
    return lam


def run_agd(cluster: Cluster, cfg: AgdConfig | None = None) -> RunTrace:
    """Nesterov accelerated gradient on ``f + g`` with the global gradient.

    Momentum follows the ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`` schedule and
    restarts whenever a step would raise the objective; the rejected step is
    replaced by a plain gradient step from the last point.
    """
    cfg = cfg or AgdConfig()
    pen = cluster.penalty
    if not pen.is_smooth:
        raise ValueError("accelerated gradient needs a smooth penalty")
    m = cluster.m

    def F(theta):
        return cluster.objective(theta)

    def grad(theta):
        return global_gradient(cluster, theta) + pen.gradient(theta)

    x = _start(cluster, cfg.init, cfg.solver)
    if cfg.step is None:
        H = cluster.hessian(x)
        H[np.diag_indices_from(H)] += pen.hessian_diag(cluster.dim)
        lam = _top_eigenvalue(H)
        eta = 1.0 / lam if lam > 0 else 1.0
    else:
        eta = cfg.step
    Fx = F(x)
    y, t = x.copy(), 1.0
    trace = RunTrace()
    trace.record(x, RoundRecord(0, 0, np.zeros(0), np.zeros(0, dtype=int)))
    increases = 0

    def gradient_step(point, f_point):
        nonlocal eta
        g = grad(point)
        gg = float(g @ g)
        while True:
            cand = point - eta * g
            f_cand = F(cand)
            if cfg.step is not None or f_cand <= f_point - 0.5 * eta * gg:
                return cand, f_cand
            eta *= cfg.shrink
            if eta < 1e-20:
                return point, f_point

    for _ in range(cfg.T):
        start = time.perf_counter()
        x_new, F_new = gradient_step(y, F(y))
        if F_new > Fx:
            increases += 1
            if cfg.step is not None and increases >= cfg.patience:
                raise StepSizeError(
                    f"objective increased for {increases} consecutive iterations with step {eta}")
            if cfg.step is None:
                t = 1.0
                x_new, F_new = gradient_step(x, Fx)
        else:
            increases = 0
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, Fx, t = x_new, F_new, t_new
        trace.record(x, RoundRecord(1, 2 * m, np.zeros(0), np.zeros(0, dtype=int),
                                    time.perf_counter() - start))
    return trace
