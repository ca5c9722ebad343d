"""GLM families, penalties and per-shard loss derivatives.

Every local loss has the canonical-link form

    f_k(theta) = (1/n) sum_i [ b(x_i' theta) - y_i x_i' theta ]

so a family is fully described by its cumulant ``b`` and the first two
derivatives.  Design matrices always carry an intercept column of ones in
position 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


class DimensionError(ValueError):
    """Parameter vector and design matrix do not line up."""


class FamilyKind(enum.Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class GlmFamily:
    """Cumulant function ``b`` of a canonical-link GLM and its derivatives."""

    kind: FamilyKind

    def cumulant(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.kind is FamilyKind.GAUSSIAN:
            return 0.5 * eta * eta
        # log(1 + e^x) = max(x, 0) + log1p(e^-|x|), finite for any finite x
        return np.maximum(eta, 0.0) + np.log1p(np.exp(-np.abs(eta)))

    def mean(self, eta):
        """First derivative b'."""
        eta = np.asarray(eta, dtype=float)
        if self.kind is FamilyKind.GAUSSIAN:
            return eta.copy()
        return expit(eta)

    def variance(self, eta):
        """Second derivative b''."""
        eta = np.asarray(eta, dtype=float)
        if self.kind is FamilyKind.GAUSSIAN:
            return np.ones_like(eta)
        mu = expit(eta)
        return mu * (1.0 - mu)

    @property
    def max_variance(self) -> float:
        """Upper bound on b'' over the real line."""
        return 1.0 if self.kind is FamilyKind.GAUSSIAN else 0.25

    def check_response(self, y) -> None:
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        if self.kind is FamilyKind.BERNOULLI and not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("Bernoulli responses must be coded 0/1 (got values outside {0, 1})")


GAUSSIAN = GlmFamily(FamilyKind.GAUSSIAN)
BERNOULLI = GlmFamily(FamilyKind.BERNOULLI)


def get_family(name) -> GlmFamily:
    if isinstance(name, GlmFamily):
        return name
    key = str(name).lower()
    if key in ("gaussian", "normal", "least_squares"):
        return GAUSSIAN
    if key in ("bernoulli", "logistic", "binomial"):
        return BERNOULLI
    raise ValueError(f"unknown GLM family {name!r}")


class PenaltyKind(enum.Enum):
    NONE = "none"
    L2 = "l2"
    L1 = "l1"


@dataclass(frozen=True)
class Penalty:
    """Deterministic penalty ``g``.

    ``L2`` is ``lam * ||theta||_2^2`` (no factor 1/2) and ``L1`` is
    ``lam * ||theta||_1``.  With ``penalize_intercept=False`` the first
    coordinate is left out of the sum.
    """

    kind: PenaltyKind = PenaltyKind.NONE
    lam: float = 0.0
    penalize_intercept: bool = True

    def __post_init__(self):
        if not self.lam >= 0.0:
            raise ValueError(f"penalty level must be nonnegative, got {self.lam}")

    @classmethod
    def none(cls) -> "Penalty":
        return cls()

    @classmethod
    def l1(cls, lam: float, penalize_intercept: bool = True) -> "Penalty":
        return cls(PenaltyKind.L1, float(lam), penalize_intercept)

    @classmethod
    def l2(cls, lam: float, penalize_intercept: bool = True) -> "Penalty":
        return cls(PenaltyKind.L2, float(lam), penalize_intercept)

    @property
    def is_smooth(self) -> bool:
        return self.kind is not PenaltyKind.L1

    @property
    def active(self) -> bool:
        return self.kind is not PenaltyKind.NONE and self.lam > 0.0

    def mask(self, dim: int) -> np.ndarray:
        """1.0 on penalized coordinates, 0.0 elsewhere."""
        w = np.ones(dim)
        if not self.penalize_intercept:
            w[0] = 0.0
        return w

    def value(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if not self.active:
            return 0.0
        w = self.mask(theta.shape[0])
        if self.kind is PenaltyKind.L2:
            return float(self.lam * np.sum(w * theta * theta))
        return float(self.lam * np.sum(w * np.abs(theta)))

    def gradient(self, theta) -> np.ndarray:
        """Gradient of the smooth (None / L2) penalties."""
        theta = np.asarray(theta, dtype=float)
        if self.kind is PenaltyKind.L1:
            raise ValueError("the L1 penalty has no gradient; use its proximal map")
        if not self.active:
            return np.zeros_like(theta)
        return 2.0 * self.lam * self.mask(theta.shape[0]) * theta

    def hessian_diag(self, dim: int) -> np.ndarray:
        """Diagonal of the penalty Hessian; the L1 penalty contributes zero curvature."""
        if self.kind is PenaltyKind.L2 and self.active:
            return 2.0 * self.lam * self.mask(dim)
        return np.zeros(dim)


def prox_penalty(penalty: Penalty, v, step: float) -> np.ndarray:
    """Proximal map ``argmin_u step * g(u) + ||u - v||^2 / 2``.

    Parameters
    ----------
    penalty : Penalty
    v : array_like
        Point to map.
    step : float
        Positive step size multiplying ``g``.

    Returns
    -------
    ndarray
        ``v`` for no penalty, ``v / (1 + 2 lam step)`` for L2 and coordinatewise
        soft-thresholding at ``lam * step`` for L1 (only on penalized
        coordinates).
    """
    if not step > 0.0:
        raise ValueError(f"proximal step must be positive, got {step}")
    v = np.array(v, dtype=float)
    if not penalty.active:
        return v
    w = penalty.mask(v.shape[0])
    if penalty.kind is PenaltyKind.L2:
        return v / (1.0 + 2.0 * penalty.lam * step * w)
    thresh = penalty.lam * step * w
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


@dataclass
class Shard:
    """Data held by one node machine.

    ``X`` is ``n x (p+1)`` with a leading column of ones; ``y`` has length ``n``.
    """

    X: np.ndarray
    y: np.ndarray
    _gram: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=float)
        self.y = np.ascontiguousarray(self.y, dtype=float).ravel()
        if self.X.ndim != 2:
            raise DimensionError("design matrix must be two-dimensional")
        n, d = self.X.shape
        if n < 1 or d < 1:
            raise DimensionError("a shard needs at least one row and one column")
        if self.y.shape[0] != n:
            raise DimensionError(f"design has {n} rows but response has {self.y.shape[0]}")
        if not np.all(self.X[:, 0] == 1.0):
            raise ValueError("first design column must be the all-ones intercept")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def gram(self) -> np.ndarray:
        """``X'X / n``, cached."""
        if self._gram is None:
            self._gram = self.X.T @ self.X / self.n
        return self._gram


def _linear_predictor(shard: Shard, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.shape[0] != shard.dim:
        raise DimensionError(f"parameter of shape {theta.shape} does not match {shard.dim} design columns")
    return shard.X @ theta


def loss(shard: Shard, family: GlmFamily, theta) -> float:
    """Average negative log-likelihood ``f_k(theta)`` (up to terms free of theta)."""
    eta = _linear_predictor(shard, theta)
    return float(np.mean(family.cumulant(eta) - shard.y * eta))


def gradient(shard: Shard, family: GlmFamily, theta) -> np.ndarray:
    eta = _linear_predictor(shard, theta)
    return shard.X.T @ (family.mean(eta) - shard.y) / shard.n


def hessian(shard: Shard, family: GlmFamily, theta) -> np.ndarray:
    eta = _linear_predictor(shard, theta)
    if family.kind is FamilyKind.GAUSSIAN:
        return shard.gram().copy()
    w = family.variance(eta)
    H = shard.X.T @ (w[:, None] * shard.X) / shard.n
    return 0.5 * (H + H.T)


def loss_and_gradient(shard: Shard, family: GlmFamily, theta) -> tuple[float, np.ndarray]:
    eta = _linear_predictor(shard, theta)
    val = float(np.mean(family.cumulant(eta) - shard.y * eta))
    return val, shard.X.T @ (family.mean(eta) - shard.y) / shard.n
