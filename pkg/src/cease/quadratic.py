"""Closed-form CEASE iterations for least squares.

With the Gaussian family the local losses are quadratics,

    f_k(theta) = theta' S_k theta / 2 - w_k' theta + const,

with ``S_k = X_k'X_k / n_k`` and ``w_k = X_k'y_k / n_k``.  A CEASE step from
``theta_t`` is then the affine map

    theta_{t+1} = theta_t - (S_1 + alpha I)^{-1} (S theta_t - w),

and CEASE with averaging replaces the single solve by the weighted average
over machines.  Both fix ``S^{-1} w``.  These maps serve as an exact oracle
for the generic engine and as a handle on the contraction factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .solver import SingularSystemError, solve_quadratic_exact


@dataclass
class QuadState:
    sigmas: list
    ws: list
    weights: np.ndarray

    def __post_init__(self):
        self.sigmas = [np.asarray(S, dtype=float) for S in self.sigmas]
        self.ws = [np.asarray(w, dtype=float) for w in self.ws]
        self.weights = np.asarray(self.weights, dtype=float)
        if not (len(self.sigmas) == len(self.ws) == len(self.weights) >= 1):
            raise ValueError("need one moment pair and weight per machine")

    @classmethod
    def from_cluster(cls, cluster) -> "QuadState":
        sigmas = [s.X.T @ s.X / s.n for s in cluster.shards]
        ws = [s.X.T @ s.y / s.n for s in cluster.shards]
        return cls(sigmas, ws, cluster.weights)

    @classmethod
    def from_moments(cls, sigmas, ws, weights=None) -> "QuadState":
        m = len(sigmas)
        return cls(sigmas, ws, np.full(m, 1.0 / m) if weights is None else weights)

    @property
    def m(self) -> int:
        return len(self.sigmas)

    @property
    def dim(self) -> int:
        return self.sigmas[0].shape[0]

    @property
    def sigma(self) -> np.ndarray:
        return sum(w * S for w, S in zip(self.weights, self.sigmas))

    @property
    def w(self) -> np.ndarray:
        return sum(wt * v for wt, v in zip(self.weights, self.ws))

    def minimizer(self) -> np.ndarray:
        return solve_quadratic_exact(self.sigma, self.w, 0.0)


def cease_step_closed(state: QuadState, alpha: float, theta_t, machine: int = 0) -> np.ndarray:
    theta_t = np.asarray(theta_t, dtype=float)
    grad = state.sigma @ theta_t - state.w
    return theta_t - solve_quadratic_exact(state.sigmas[machine], grad, alpha)


def cease_avg_step_closed(state: QuadState, alpha: float, theta_t) -> np.ndarray:
    theta_t = np.asarray(theta_t, dtype=float)
    grad = state.sigma @ theta_t - state.w
    correction = np.zeros(state.dim)
    for k, (wt, S) in enumerate(zip(state.weights, state.sigmas)):
        try:
            correction += wt * solve_quadratic_exact(S, grad, alpha)
        except SingularSystemError as exc:
            raise SingularSystemError(f"machine {k}: {exc}") from exc
    return theta_t - correction


def closed_form_trace(state: QuadState, alpha: float, theta0, T: int, averaging: bool = True):
    """Iterates ``theta_0 .. theta_T`` of the closed-form map, as a ``(T+1, d)`` array."""
    out = [np.asarray(theta0, dtype=float)]
    for _ in range(T):
        if averaging:
            out.append(cease_avg_step_closed(state, alpha, out[-1]))
        else:
            out.append(cease_step_closed(state, alpha, out[-1]))
    return np.array(out)


def iteration_matrix(state: QuadState, alpha: float, averaging: bool = True) -> np.ndarray:
    """``I - sum_k w_k (S_k + alpha I)^{-1} S`` (or machine 0 only)."""
    S = state.sigma
    idx = range(state.m) if averaging else [0]
    weights = state.weights if averaging else [1.0]
    A = np.eye(state.dim)
    for wt, k in zip(weights, idx):
        A -= wt * solve_quadratic_exact(state.sigmas[k], S, alpha)
    return A


def _sqrt_pd(S):
    vals, vecs = linalg.eigh(S)
    if vals[0] <= 0:
        raise SingularSystemError("pooled second-moment matrix is not positive definite")
    root = np.sqrt(vals)
    return (vecs * root) @ vecs.T, (vecs / root) @ vecs.T


def spectral_contraction(state: QuadState, alpha: float, averaging: bool = True) -> float:
    """Operator norm of the iteration map in the ``S^{1/2}`` metric.

    The error ``e_t = S^{1/2}(theta_t - S^{-1}w)`` evolves as
    ``e_{t+1} = S^{1/2} A S^{-1/2} e_t``, so the returned norm bounds every
    per-step ratio ``||e_{t+1}|| / ||e_t||``.
    """
    half, inv_half = _sqrt_pd(state.sigma)
    A = iteration_matrix(state, alpha, averaging)
    return float(np.linalg.norm(half @ A @ inv_half, 2))


def metric_error(state: QuadState, theta) -> float:
    """``||S^{1/2}(theta - S^{-1} w)||_2``."""
    half, _ = _sqrt_pd(state.sigma)
    return float(np.linalg.norm(half @ (np.asarray(theta) - state.minimizer())))
