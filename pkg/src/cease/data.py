"""Synthetic logistic designs, Spambase ingestion and partitioning.

Randomness comes from counter-based Philox generators keyed by
``SeedSequence(seed, spawn_key=(stream,))`` with one stream per purpose:

=========== ====== ==========================================
stream      key    used for
=========== ====== ==========================================
data        0      covariates and responses
theta_star  1      direction of the true parameter
split       2      train/test split of real data
partition   3      row shuffling before sharding
=========== ====== ==========================================

so changing how a bundle is partitioned never perturbs the data itself.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .engine import Cluster
from .model import BERNOULLI, GlmFamily, Penalty, Shard

STREAMS = {"data": 0, "theta_star": 1, "split": 2, "partition": 3}


def rng_stream(seed: int, name: str) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name],))
    return np.random.Generator(np.random.Philox(ss))


class DataFormatError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class SyntheticSpec:
    """One of the two simulated logistic designs.

    ``logistic_dense``: covariance ``diag(10, 5, 2, 1, ..., 1)`` and a true
    parameter of norm 3 in a uniformly random direction.
    ``logistic_sparse_l1``: identity covariance and true parameter
    ``(1, ..., 1, 0, ..., 0) / sqrt(2)`` with ten leading ones (intercept
    included).  ``theta_star`` overrides the rule.
    """

    experiment: str = "logistic_dense"
    N: int | None = None
    p: int | None = None
    covariance: str | None = None
    seed: int = 0
    theta_star: tuple | None = None

    def __post_init__(self):
        defaults = {"logistic_dense": (10000, 100, "diag10521"),
                    "logistic_sparse_l1": (5000, 1000, "identity")}
        if self.experiment not in defaults:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        N, p, cov = defaults[self.experiment]
        if self.N is None:
            object.__setattr__(self, "N", N)
        if self.p is None:
            object.__setattr__(self, "p", p)
        if self.covariance is None:
            object.__setattr__(self, "covariance", cov)
        if self.covariance not in ("diag10521", "identity"):
            raise ValueError(f"unknown covariance {self.covariance!r}")
        if self.N < 1 or self.p < 0:
            raise ValueError("need N >= 1 and p >= 0")
        if self.theta_star is not None:
            object.__setattr__(self, "theta_star", tuple(float(v) for v in self.theta_star))
            if len(self.theta_star) != self.p + 1:
                raise ValueError(f"theta_star must have length p + 1 = {self.p + 1}")

    def describe(self) -> str:
        return f"{self.experiment}(N={self.N},p={self.p},cov={self.covariance})"


def covariance_diagonal(kind: str, p: int) -> np.ndarray:
    diag = np.ones(p)
    if kind == "diag10521":
        lead = np.array([10.0, 5.0, 2.0])[:p]
        diag[:lead.size] = lead
    return diag


def true_parameter(spec: SyntheticSpec) -> np.ndarray:
    if spec.theta_star is not None:
        return np.array(spec.theta_star)
    if spec.experiment == "logistic_dense":
        z = rng_stream(spec.seed, "theta_star").standard_normal(spec.p + 1)
        return 3.0 * z / np.linalg.norm(z)
    theta = np.zeros(spec.p + 1)
    theta[:10] = 1.0
    return theta / math.sqrt(2.0)


@dataclass
class DatasetBundle:
    X: np.ndarray
    y: np.ndarray
    theta_star: np.ndarray | None = None
    X_test: np.ndarray | None = None
    y_test: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("row counts of X and y differ")
        if (self.X_test is None) != (self.y_test is None):
            raise ValueError("test design and responses must be given together")

    @property
    def n_train(self) -> int:
        return self.X.shape[0]

    @property
    def n_test(self) -> int:
        return 0 if self.X_test is None else self.X_test.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1] - 1


def generate(spec: SyntheticSpec) -> DatasetBundle:
    """Draw ``x_i = (1, u_i)``, ``u_i ~ N(0, Sigma)`` and logistic responses."""
    rng = rng_stream(spec.seed, "data")
    theta = true_parameter(spec)
    scale = np.sqrt(covariance_diagonal(spec.covariance, spec.p))
    U = rng.standard_normal((spec.N, spec.p)) * scale
    X = np.hstack([np.ones((spec.N, 1)), U])
    y = (rng.random(spec.N) < expit(X @ theta)).astype(float)
    prov = {"source": "synthetic", "spec": spec.describe(), "seed": spec.seed}
    return DatasetBundle(X, y, theta, provenance=prov)


def partition(bundle: DatasetBundle, m: int, scheme: str = "contiguous", seed: int = 0,
              family: GlmFamily = BERNOULLI, penalty: Penalty | None = None) -> Cluster:
    """Split the training rows over ``m`` machines; sizes differ by at most one.

    Leftover rows go one per machine starting from machine 0.
    ``scheme="shuffled"`` permutes the rows first with the partition stream.
    """
    N = bundle.n_train
    if m < 1 or m > N:
        raise ValueError(f"cannot split {N} rows over {m} machines")
    idx = np.arange(N)
    if scheme == "shuffled":
        idx = rng_stream(seed, "partition").permutation(N)
    elif scheme != "contiguous":
        raise ValueError(f"unknown partition scheme {scheme!r}")
    shards = [Shard(bundle.X[part], bundle.y[part]) for part in np.array_split(idx, m)]
    return Cluster(shards, family, penalty or Penalty())


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def read_numeric_csv(path, n_fields: int | None = None) -> np.ndarray:
    """Comma-separated numbers without a header; errors name the offending line."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if n_fields is not None and len(row) != n_fields:
                raise DataFormatError(f"expected {n_fields} fields, found {len(row)}", lineno)
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise DataFormatError(f"non-numeric field ({exc})", lineno) from None
            if n_fields is None:
                n_fields = len(row)
    if not rows:
        raise DataFormatError("file contains no data rows")
    return np.array(rows)


SPAMBASE_FIELDS = 58


def standardize(train, test=None):
    """Center and scale columns with training moments; constant columns map to 0."""
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    const = std == 0
    std[const] = 1.0
    out_train = (train - mean) / std
    out_train[:, const] = 0.0
    if test is None:
        return out_train, None
    out_test = (test - mean) / std
    out_test[:, const] = 0.0
    return out_train, out_test


def load_spambase(path, test_size: int = 1000, seed: int = 0,
                  standardize_features: bool = True) -> DatasetBundle:
    """Read the UCI Spambase file (57 features then a 0/1 label per line).

    A random ``test_size`` rows (split stream) are held out.  Features are
    standardized with training-split moments unless disabled, and an
    intercept column is prepended.  The row count is taken from the file;
    the canonical release has 4601 rows.
    """
    data = read_numeric_csv(path, SPAMBASE_FIELDS)
    labels = data[:, -1]
    bad = np.flatnonzero((labels != 0.0) & (labels != 1.0))
    if bad.size:
        raise DataFormatError(f"label {labels[bad[0]]!r} is not 0/1", int(bad[0]) + 1)
    n = data.shape[0]
    if not 0 <= test_size < n:
        raise ValueError(f"test_size {test_size} must be below the {n} available rows")
    perm = rng_stream(seed, "split").permutation(n)
    test_idx, train_idx = np.sort(perm[:test_size]), np.sort(perm[test_size:])
    feats = data[:, :-1]
    train, test = feats[train_idx], feats[test_idx]
    if standardize_features:
        train, test = standardize(train, test)
    X = np.hstack([np.ones((train.shape[0], 1)), train])
    Xt = np.hstack([np.ones((test.shape[0], 1)), test]) if test_size else None
    prov = {"source": "spambase", "path": str(Path(path).resolve()), "sha256": file_sha256(path),
            "rows": n, "test_size": test_size, "seed": seed, "standardized": standardize_features}
    return DatasetBundle(X, labels[train_idx], None, Xt,
                         labels[test_idx] if test_size else None, prov)


def test_error(theta, X, y) -> float:
    """Misclassification rate of the rule ``1{x'theta > 0}`` (ties predict 0)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("empty test set")
    pred = (X @ np.asarray(theta, dtype=float) > 0).astype(float)
    return float(np.mean(pred != y))


test_error.__test__ = False  # not a pytest test


def dump_bundle(bundle: DatasetBundle, path) -> Path:
    """Write training then test rows as ``features..., label`` plus a provenance sidecar.

    The sidecar (``<path>.provenance``) holds ``key=value`` lines including
    the SHA-256 of the written CSV.
    """
    path = Path(path)
    blocks = [(bundle.X, bundle.y)]
    if bundle.X_test is not None:
        blocks.append((bundle.X_test, bundle.y_test))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for X, y in blocks:
            for row, label in zip(X[:, 1:], y):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(label))])
    meta = dict(bundle.provenance)
    meta.update(n_train=bundle.n_train, n_test=bundle.n_test, checksum=file_sha256(path))
    if bundle.theta_star is not None:
        meta["theta_star"] = " ".join(repr(float(v)) for v in bundle.theta_star)
    side = path.with_name(path.name + ".provenance")
    side.write_text("".join(f"{k}={v}\n" for k, v in meta.items()))
    return side
