"""Local solvers for the per-machine surrogate problems.

A node minimizes

    Q(theta) = f_k(theta) + g(theta) - <shift, theta> + (alpha/2) ||theta - anchor||^2

Smooth penalties go through a damped Newton method with Armijo backtracking.
The L1 penalty goes through FISTA with backtracking on the Lipschitz
estimate and function-value restarts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .model import GlmFamily, Penalty, PenaltyKind, Shard, loss_and_gradient, prox_penalty
from .model import hessian as glm_hessian


class ConvergenceError(RuntimeError):
    """Inner solver ran out of iterations (or stalled) before meeting its tolerance.

    Attributes
    ----------
    x : ndarray
        Last iterate.
    residual : float
        Stopping residual at ``x``.
    node : int or None
        Machine index, filled in by the engine.
    iteration : int or None
        Outer iteration, filled in by the engine.
    """

    def __init__(self, message, x=None, residual=float("nan"), node=None, iteration=None):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.node = node
        self.iteration = iteration

    def __str__(self):
        where = []
        if self.iteration is not None:
            where.append(f"iteration {self.iteration}")
        if self.node is not None:
            where.append(f"node {self.node}")
        msg = super().__str__()
        return f"{msg} [{', '.join(where)}]" if where else msg


class SingularSystemError(np.linalg.LinAlgError):
    """A linear system expected to be positive definite is not."""


@dataclass(frozen=True)
class SolverSettings:
    grad_tol: float | None = None
    max_inner_iters: int | None = None
    shrink: float = 0.5
    armijo: float = 1e-4

    def __post_init__(self):
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_inner_iters is not None and self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.armijo > 0:
            raise ValueError("sufficient-decrease constant must be positive")

    def smooth_tol(self) -> float:
        return 1e-10 if self.grad_tol is None else self.grad_tol

    def nonsmooth_tol(self) -> float:
        return 1e-8 if self.grad_tol is None else self.grad_tol

    def newton_iters(self) -> int:
        return 200 if self.max_inner_iters is None else self.max_inner_iters

    def fista_iters(self) -> int:
        return 5000 if self.max_inner_iters is None else self.max_inner_iters


DEFAULT_SETTINGS = SolverSettings()


@dataclass
class SurrogateProblem:
    """Gradient-enhanced local objective with an optional proximal term."""

    shard: Shard
    family: GlmFamily
    penalty: Penalty
    shift: np.ndarray
    anchor: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        d = self.shard.dim
        self.shift = np.asarray(self.shift, dtype=float)
        self.anchor = np.asarray(self.anchor, dtype=float)
        if self.shift.shape != (d,) or self.anchor.shape != (d,):
            raise ValueError(f"shift and anchor must have length {d}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")

    @property
    def dim(self) -> int:
        return self.shard.dim

    def smooth_value_and_grad(self, theta):
        """Value and gradient of Q without the L1 term (smooth penalties included)."""
        val, grad = loss_and_gradient(self.shard, self.family, theta)
        diff = theta - self.anchor
        val += -float(self.shift @ theta) + 0.5 * self.alpha * float(diff @ diff)
        grad = grad - self.shift + self.alpha * diff
        if self.penalty.is_smooth and self.penalty.active:
            val += self.penalty.value(theta)
            grad = grad + self.penalty.gradient(theta)
        return val, grad

    def smooth_hessian(self, theta) -> np.ndarray:
        H = glm_hessian(self.shard, self.family, theta)
        H[np.diag_indices_from(H)] += self.alpha + self.penalty.hessian_diag(self.dim)
        return H

    def objective(self, theta) -> float:
        val, _ = self.smooth_value_and_grad(theta)
        if self.penalty.kind is PenaltyKind.L1:
            val += self.penalty.value(theta)
        return val


def _newton_direction(H, g):
    dim = H.shape[0]
    shift = 1e-10 * max(np.trace(H), 1e-300) / dim
    damping = 0.0
    for _ in range(20):
        try:
            factor = linalg.cho_factor(H + damping * np.eye(dim), check_finite=False)
            return -linalg.cho_solve(factor, g, check_finite=False)
        except linalg.LinAlgError:
            damping = shift if damping == 0.0 else 10.0 * damping
    raise SingularSystemError("Newton system stayed singular after Levenberg damping")


def solve_smooth(prob: SurrogateProblem, init, settings: SolverSettings | None = None,
                 full_output: bool = False):
    """Minimize a smooth surrogate by damped Newton.

    Stops once ``||grad Q|| <= grad_tol * (1 + ||grad Q(init)||)``.

    Parameters
    ----------
    prob : SurrogateProblem
        Penalty must be ``None`` or ``L2``.
    init : array_like
        Starting point (the engine warm-starts at the current global iterate).
    settings : SolverSettings, optional
    full_output : bool
        Also return ``(residual, n_iter)``.

    Returns
    -------
    theta : ndarray
    residual, n_iter : float, int
        Only if ``full_output``.
    """
    if not prob.penalty.is_smooth:
        raise ValueError("solve_smooth needs a smooth penalty; use solve_nonsmooth for L1")
    settings = settings or DEFAULT_SETTINGS
    theta = np.array(init, dtype=float)
    val, g = prob.smooth_value_and_grad(theta)
    target = settings.smooth_tol() * (1.0 + np.linalg.norm(g))
    res = np.linalg.norm(g)
    n_iter = 0
    while res > target:
        if n_iter >= settings.newton_iters():
            raise ConvergenceError(
                f"Newton did not converge in {n_iter} iterations (residual {res:.3e})", theta, res)
        if not np.isfinite(val):
            raise ConvergenceError("Newton iterate left the finite domain", theta, res)
        d = _newton_direction(prob.smooth_hessian(theta), g)
        slope = float(g @ d)
        if not slope < 0:
            d, slope = -g, -float(g @ g)
        slack = 8 * np.finfo(float).eps * max(1.0, abs(val))
        step = 1.0
        while True:
            cand = theta + step * d
            cval, cg = prob.smooth_value_and_grad(cand)
            if cval <= val + settings.armijo * step * slope + slack:
                break
            step *= settings.shrink
            if step < 1e-20:
                raise ConvergenceError(f"line search stalled (residual {res:.3e})", theta, res)
        theta, val, g = cand, cval, cg
        res = np.linalg.norm(g)
        n_iter += 1
    if full_output:
        return theta, float(res), n_iter
    return theta


def _curvature_estimate(prob: SurrogateProblem, theta, iters=20):
    eta = prob.shard.X @ theta
    w = prob.family.variance(eta)
    X, n = prob.shard.X, prob.shard.n
    v = np.full(prob.dim, 1.0 / math.sqrt(prob.dim))
    lam = 0.0
    for _ in range(iters):
        u = X.T @ (w * (X @ v)) / n
        lam = float(np.linalg.norm(u))
        if lam == 0.0:
            break
        v = u / lam
    return lam + prob.alpha


def prox_grad_residual(prob: SurrogateProblem, theta, lipschitz: float) -> float:
    """``||theta - prox_{g/L}(theta - grad/L)||`` for the L1 surrogate."""
    _, g = prob.smooth_value_and_grad(theta)
    step = 1.0 / lipschitz
    return float(np.linalg.norm(theta - prox_penalty(prob.penalty, theta - step * g, step)))


def solve_nonsmooth(prob: SurrogateProblem, init, settings: SolverSettings | None = None,
                    full_output: bool = False):
    """Minimize an L1-penalized surrogate with restarted, backtracking FISTA.

    Terminates when the proximal-gradient fixed-point residual
    ``||theta - prox_{g/L}(theta - grad(theta)/L)||`` drops to ``grad_tol``,
    with ``L`` the current backtracked Lipschitz estimate.
    """
    if prob.penalty.kind is not PenaltyKind.L1:
        raise ValueError("solve_nonsmooth expects an L1 penalty")
    settings = settings or DEFAULT_SETTINGS
    tol = settings.nonsmooth_tol()
    grow = 1.0 / settings.shrink
    pen = prob.penalty

    x = np.array(init, dtype=float)
    L = max(_curvature_estimate(prob, x), 1e-12)
    fx, gx = prob.smooth_value_and_grad(x)
    Fx = fx + pen.value(x)
    y, fy, gy = x, fx, gx
    t = 1.0
    res = prox_grad_residual(prob, x, L)
    if res <= tol:
        return (x, res, 0) if full_output else x

    for k in range(1, settings.fista_iters() + 1):
        while True:
            step = 1.0 / L
            x_new = prox_penalty(pen, y - step * gy, step)
            diff = x_new - y
            f_new, g_new = prob.smooth_value_and_grad(x_new)
            slack = 8 * np.finfo(float).eps * max(1.0, abs(fy))
            if f_new <= fy + float(gy @ diff) + 0.5 * L * float(diff @ diff) + slack:
                break
            L *= grow
        step = 1.0 / L
        res = float(np.linalg.norm(x_new - prox_penalty(pen, x_new - step * g_new, step)))
        if res <= tol:
            return (x_new, res, k) if full_output else x_new
        F_new = f_new + pen.value(x_new)
        if not np.isfinite(F_new):
            raise ConvergenceError("FISTA iterate left the finite domain", x, res)
        if F_new > Fx:
            # function-value restart: drop momentum and restart from the better point
            t = 1.0
            y, fy, gy = x, fx, gx
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        fy, gy = prob.smooth_value_and_grad(y)
        x, fx, gx, Fx, t = x_new, f_new, g_new, F_new, t_new
    raise ConvergenceError(f"FISTA did not converge in {settings.fista_iters()} iterations "
                           f"(residual {res:.3e})", x, res)


def solve(prob: SurrogateProblem, init, settings: SolverSettings | None = None,
          full_output: bool = False):
    """Dispatch on the penalty: Newton when smooth, FISTA for L1."""
    if prob.penalty.is_smooth:
        return solve_smooth(prob, init, settings, full_output)
    return solve_nonsmooth(prob, init, settings, full_output)


def solve_quadratic_exact(sigma_k, rhs, alpha: float = 0.0) -> np.ndarray:
    """Solve ``(sigma_k + alpha I) theta = rhs`` with a Cholesky factorization."""
    sigma_k = np.asarray(sigma_k, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    A = sigma_k + alpha * np.eye(sigma_k.shape[0])
    try:
        factor = linalg.cho_factor(A, check_finite=True)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"matrix plus {alpha} * I is not positive definite") from exc
    return linalg.cho_solve(factor, rhs)
