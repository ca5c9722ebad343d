"""Empirical stand-ins for the constants that govern contraction.

All quantities are measured at single points (the reference minimizer, or
a user-chosen point plus optional random points in a ball).  They are point
estimates of ``rho`` and ``rho_0`` and lower bounds for the homogeneity
``delta``; nothing here certifies the assumptions over a whole ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Cluster
from .model import hessian as local_hessian


def power_iteration(A, iters: int = 200, tol: float = 1e-9, seed: int = 0):
    """Spectral norm of a symmetric matrix.

    Iterates ``v <- A(Av) / ||A(Av)||`` so that eigenvalues of equal magnitude
    and opposite sign do not stall the iteration.

    Returns
    -------
    norm : float
    residual : float
        ``||A^2 v - norm^2 v|| / norm^2`` at the final vector (0 for ``A = 0``).
    n_iter : int
    """
    A = np.asarray(A, dtype=float)
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    sigma, resid = 0.0, 0.0
    for it in range(1, iters + 1):
        Av = A @ v
        sigma = float(np.linalg.norm(Av))
        if sigma == 0.0:
            return 0.0, 0.0, it
        AAv = A @ Av
        resid = float(np.linalg.norm(AAv - sigma * sigma * v)) / (sigma * sigma)
        if resid <= tol:
            break
        v = AAv / np.linalg.norm(AAv)
    return sigma, resid, it


@dataclass
class HomogeneityReport:
    delta: float
    norms: np.ndarray
    theta: np.ndarray
    residual: float
    converged: bool
    points_checked: int = 1

    def as_dict(self) -> dict:
        return {"delta": self.delta, "residual": self.residual,
                "converged": self.converged, "points_checked": self.points_checked}


def estimate_delta(cluster: Cluster, theta, iters: int = 200, seed: int = 0,
                   radius: float = 0.0, n_points: int = 0, tol: float = 1e-9) -> HomogeneityReport:
    """``max_k ||hess f_k(theta) - hess f(theta)||_2`` by power iteration.

    With ``radius > 0`` and ``n_points > 0`` the maximum also runs over that
    many uniformly random points in the ball of that radius around ``theta``;
    ``norms`` always holds the per-machine maxima.
    """
    if iters < 10:
        raise ValueError("need at least 10 power iterations")
    theta = np.asarray(theta, dtype=float)
    points = [theta]
    if radius > 0 and n_points > 0:
        rng = np.random.Generator(np.random.Philox(seed + 1))
        for _ in range(n_points):
            d = rng.standard_normal(theta.shape[0])
            r = radius * rng.random() ** (1.0 / theta.shape[0])
            points.append(theta + r * d / np.linalg.norm(d))
    norms = np.zeros(cluster.m)
    worst_resid = 0.0
    for pt in points:
        locals_ = [local_hessian(s, cluster.family, pt) for s in cluster.shards]
        H = np.zeros_like(locals_[0])
        for w, Hk in zip(cluster.weights, locals_):
            H += w * Hk
        for k, Hk in enumerate(locals_):
            val, resid, _ = power_iteration(Hk - H, iters, tol, seed + k)
            norms[k] = max(norms[k], val)
            worst_resid = max(worst_resid, resid)
    return HomogeneityReport(float(norms.max()), norms, theta, worst_resid,
                             worst_resid <= tol, len(points))


@dataclass
class CurvatureReport:
    rho: float
    rho0: float
    kappa: float
    local_rhos: np.ndarray
    flagged: bool

    def as_dict(self) -> dict:
        return {"rho": self.rho, "rho0": self.rho0, "kappa": self.kappa, "flagged": self.flagged}


def estimate_rho(cluster: Cluster, theta_hat) -> CurvatureReport:
    """Strong convexity of ``f + g`` and of the worst ``f_k + g`` at one point.

    ``kappa`` is ``lambda_max(hess f) / rho``.  The L1 penalty has no
    curvature; the L2 penalty adds ``2 lam`` on penalized coordinates.  A
    nonpositive ``rho`` is reported with ``flagged=True``.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    pen_diag = cluster.penalty.hessian_diag(cluster.dim)
    H = cluster.hessian(theta_hat)
    lam_max = float(np.linalg.eigvalsh(H)[-1])
    rho = float(np.linalg.eigvalsh(H + np.diag(pen_diag))[0])
    local = np.array([
        np.linalg.eigvalsh(local_hessian(s, cluster.family, theta_hat) + np.diag(pen_diag))[0]
        for s in cluster.shards])
    rho0 = float(min(local.min(), rho))
    flagged = not rho > 0
    kappa = lam_max / rho if rho > 0 else math.inf
    return CurvatureReport(rho, rho0, kappa, local, flagged)


def default_alpha(cluster: Cluster, rule: str = "scaled", c: float = 0.15, theta=None,
                  iters: int = 200) -> float:
    """Proximal weight ``alpha``.

    ``rule="scaled"`` gives ``c * p / n`` with ``n`` the average local sample
    size (0.15 for the dense logistic runs, 0.05 for the L1 runs).
    ``rule="delta2"`` gives ``delta^2 / rho`` measured at ``theta``
    (zeros by default).
    """
    if rule == "scaled":
        return c * cluster.p / cluster.n
    if rule == "delta2":
        theta = np.zeros(cluster.dim) if theta is None else np.asarray(theta, dtype=float)
        delta = estimate_delta(cluster, theta, iters).delta
        rho = estimate_rho(cluster, theta).rho
        if not rho > 0:
            raise ValueError(f"rho estimate {rho:.3g} is not positive; use rule='scaled' instead")
        return delta * delta / rho
    raise ValueError(f"unknown alpha rule {rule!r}")


def theoretical_factor(delta: float, rho: float, rho0: float, alpha: float) -> float:
    """Contraction factor ``(delta/(rho0+alpha) * sqrt(rho^2 + 2 alpha rho) + alpha) / (rho + alpha)``."""
    return (delta / (rho0 + alpha) * math.sqrt(rho * rho + 2 * alpha * rho) + alpha) / (rho + alpha)


@dataclass
class ContractionReport:
    ratios: np.ndarray
    rate: float
    theoretical: float | None = None
    condition_met: bool | None = None
    errors: np.ndarray = field(default_factory=lambda: np.zeros(0))


def contraction_report(iterates, theta_hat, floor: float = 1e-8, delta=None, rho=None,
                       rho0=None, alpha: float = 0.0) -> ContractionReport:
    """Per-step error ratios and their geometric mean.

    Ratios ``e_{t+1}/e_t`` are kept while ``e_t`` exceeds ``floor`` (100 times
    the inner solver tolerance by default) and the sequence is cut at the
    first iterate that lands within ``floor`` of ``theta_hat``.  When
    ``delta``, ``rho`` and ``rho0`` are supplied the theoretical factor is
    attached for comparison only.
    """
    if hasattr(iterates, "as_array"):
        iterates = iterates.as_array()
    iterates = np.asarray(iterates, dtype=float)
    if iterates.shape[0] < 2:
        raise ValueError("need at least two iterates")
    errs = np.linalg.norm(iterates - np.asarray(theta_hat)[None, :], axis=1)
    ratios = []
    for t in range(len(errs) - 1):
        if errs[t] <= floor:
            break
        ratios.append(errs[t + 1] / errs[t])
    ratios = np.array(ratios)
    if not len(ratios):
        rate = float("nan")
    elif np.any(ratios == 0.0):
        rate = 0.0
    else:
        rate = float(np.exp(np.mean(np.log(ratios))))
    report = ContractionReport(ratios, rate, errors=errs)
    if delta is not None and rho is not None and rho0 is not None:
        report.theoretical = theoretical_factor(delta, rho, rho0, alpha)
        report.condition_met = (delta / (rho0 + alpha)) ** 2 < rho / (rho + 2 * alpha)
    return report
