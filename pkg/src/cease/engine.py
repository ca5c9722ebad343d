"""Simulated node machines and central processor.

The four algorithms share one round structure: every machine ships its
local gradient at the current iterate, the center forms the global
gradient, and one or all machines minimize a gradient-enhanced surrogate.

========== =========== ======================= =========================
variant    solvers     proximal term           comm rounds / iteration
========== =========== ======================= =========================
CSL        machine 0   none                    1
GEL        all m       none                    2
CEASE      machine 0   (alpha/2)||. - th_t||^2 1
CEASE_AVG  all m       (alpha/2)||. - th_t||^2 2
========== =========== ======================= =========================

Vector counting: every p+1 vector crossing the node/center boundary counts
once, and a broadcast to m machines counts m times.  A single-solver
iteration therefore ships ``2m`` vectors (m gradients in, one broadcast of
the new iterate) and an averaging iteration ships ``4m`` (m gradients in,
broadcast of the global gradient, m local solutions in, broadcast of the
average).

Averages across machines are weighted by shard size so that the global
loss equals the risk on the pooled data even when shards are unequal.
"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import BERNOULLI, GlmFamily, Penalty, Shard
from .model import gradient as local_gradient
from .model import hessian as local_hessian
from .model import loss as local_loss
from .solver import ConvergenceError, SolverSettings, SurrogateProblem, solve


class Variant(enum.Enum):
    CSL = "CSL"
    GEL = "GEL"
    CEASE = "CEASE"
    CEASE_AVG = "CEASE_AVG"

    @property
    def averaging(self) -> bool:
        return self in (Variant.GEL, Variant.CEASE_AVG)

    @property
    def proximal(self) -> bool:
        return self in (Variant.CEASE, Variant.CEASE_AVG)

    @classmethod
    def parse(cls, name) -> "Variant":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "_")
        aliases = {"CEASE_SINGLE": "CEASE", "CEASEAVG": "CEASE_AVG"}
        return cls(aliases.get(key, key))


@dataclass
class Cluster:
    shards: list[Shard]
    family: GlmFamily = BERNOULLI
    penalty: Penalty = field(default_factory=Penalty)
    _pooled: Shard | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.shards = list(self.shards)
        if not self.shards:
            raise ValueError("a cluster needs at least one machine")
        dims = {s.dim for s in self.shards}
        if len(dims) != 1:
            raise ValueError(f"shards disagree on column count: {sorted(dims)}")
        for s in self.shards:
            self.family.check_response(s.y)

    @property
    def m(self) -> int:
        return len(self.shards)

    @property
    def dim(self) -> int:
        return self.shards[0].dim

    @property
    def p(self) -> int:
        """Number of covariates, excluding the intercept."""
        return self.dim - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.array([s.n for s in self.shards])

    @property
    def N(self) -> int:
        return int(self.sizes.sum())

    @property
    def n(self) -> float:
        """Average local sample size ``N / m``."""
        return self.N / self.m

    @property
    def weights(self) -> np.ndarray:
        return self.sizes / self.N

    def pooled(self) -> Shard:
        if self._pooled is None:
            self._pooled = Shard(np.vstack([s.X for s in self.shards]),
                                 np.concatenate([s.y for s in self.shards]))
        return self._pooled

    def with_shards(self, shards) -> "Cluster":
        return Cluster(list(shards), self.family, self.penalty)

    def loss(self, theta) -> float:
        return float(sum(w * local_loss(s, self.family, theta)
                         for w, s in zip(self.weights, self.shards)))

    def objective(self, theta) -> float:
        return self.loss(theta) + self.penalty.value(theta)

    def hessian(self, theta) -> np.ndarray:
        H = np.zeros((self.dim, self.dim))
        for w, s in zip(self.weights, self.shards):
            H += w * local_hessian(s, self.family, theta)
        return H


def global_gradient(cluster: Cluster, theta) -> np.ndarray:
    """Shard-size weighted average of local gradients, summed in machine order."""
    g = np.zeros(cluster.dim)
    for w, s in zip(cluster.weights, cluster.shards):
        g += w * local_gradient(s, cluster.family, theta)
    return g


@dataclass(frozen=True)
class AlgoConfig:
    """Run configuration.

    ``alpha`` is only used by the proximal variants; CSL and GEL are the
    ``alpha = 0`` members of the family and ignore it.  ``init`` is
    ``"zero"``, ``"average"`` (one-shot average of local minimizers) or an
    explicit starting vector.
    """

    variant: Variant = Variant.CEASE_AVG
    alpha: float = 0.0
    T: int = 10
    init: object = "zero"
    solver: SolverSettings = field(default_factory=SolverSettings)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.T < 0:
            raise ValueError("iteration budget T must be nonnegative")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if isinstance(self.init, str) and self.init not in ("zero", "average"):
            raise ValueError(f"unknown initialization {self.init!r}")

    @property
    def effective_alpha(self) -> float:
        return self.alpha if self.variant.proximal else 0.0


@dataclass
class RoundRecord:
    comm_rounds: int
    vectors_sent: int
    residuals: np.ndarray
    inner_iters: np.ndarray
    wall_time: float = 0.0


@dataclass
class RunTrace:
    iterates: list = field(default_factory=list)
    comm_rounds: list = field(default_factory=list)
    vectors_sent: list = field(default_factory=list)
    inner_residuals: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)

    def __len__(self):
        return len(self.iterates)

    @property
    def T(self) -> int:
        return len(self.iterates) - 1

    def as_array(self) -> np.ndarray:
        return np.array(self.iterates)

    def errors(self, reference) -> np.ndarray:
        """``||theta_t - reference||_2`` for every recorded iterate."""
        return np.linalg.norm(self.as_array() - np.asarray(reference)[None, :], axis=1)

    def record(self, theta, rec: RoundRecord) -> None:
        self.iterates.append(np.array(theta, dtype=float))
        self.comm_rounds.append(rec.comm_rounds)
        self.vectors_sent.append(rec.vectors_sent)
        self.inner_residuals.append(np.asarray(rec.residuals, dtype=float))
        self.inner_iters.append(np.asarray(rec.inner_iters))
        self.wall_times.append(rec.wall_time)


def _local_solve(cluster, k, shift, theta_t, alpha, settings):
    prob = SurrogateProblem(cluster.shards[k], cluster.family, cluster.penalty,
                            shift, theta_t, alpha)
    try:
        return solve(prob, theta_t, settings, full_output=True)
    except ConvergenceError as exc:
        exc.node = k
        raise


def step(cluster: Cluster, config: AlgoConfig, theta_t, executor=None):
    """One outer iteration; returns ``(theta_next, RoundRecord)``."""
    theta_t = np.asarray(theta_t, dtype=float)
    if not np.all(np.isfinite(theta_t)):
        raise ValueError("current iterate is not finite")
    start = time.perf_counter()
    m = cluster.m
    local_grads = [local_gradient(s, cluster.family, theta_t) for s in cluster.shards]
    g = np.zeros(cluster.dim)
    for w, gk in zip(cluster.weights, local_grads):
        g += w * gk

    nodes = range(m) if config.variant.averaging else [0]
    alpha = config.effective_alpha

    def work(k):
        return _local_solve(cluster, k, local_grads[k] - g, theta_t, alpha, config.solver)

    if executor is not None and len(nodes) > 1:
        results = list(executor.map(work, nodes))
    else:
        results = [work(k) for k in nodes]

    if config.variant.averaging:
        theta_next = np.zeros(cluster.dim)
        for w, (sol, _, _) in zip(cluster.weights, results):
            theta_next += w * sol
        rec = RoundRecord(2, 4 * m, np.array([r[1] for r in results]),
                          np.array([r[2] for r in results]))
    else:
        theta_next = results[0][0]
        rec = RoundRecord(1, 2 * m, np.array([results[0][1]]), np.array([results[0][2]]))
    rec.wall_time = time.perf_counter() - start
    return theta_next, rec


def resolve_init(cluster: Cluster, config: AlgoConfig) -> np.ndarray:
    if isinstance(config.init, str):
        if config.init == "zero":
            return np.zeros(cluster.dim)
        return one_shot_average(cluster, config.solver)
    theta0 = np.array(config.init, dtype=float)
    if theta0.shape != (cluster.dim,):
        raise ValueError(f"initial value must have length {cluster.dim}")
    return theta0


def run(cluster: Cluster, config: AlgoConfig, threads: int = 1, theta0=None) -> RunTrace:
    """Execute ``config.T`` iterations; ``trace.iterates[0]`` is the start point.

    ``theta0`` overrides the configured initialization (handy when several
    runs share one one-shot average).  On an inner-solver failure the
    exception carries ``iteration`` and ``node`` and a ``trace`` attribute
    holding the iterations completed so far.
    """
    trace = RunTrace()
    theta = resolve_init(cluster, config) if theta0 is None else np.array(theta0, dtype=float)
    trace.record(theta, RoundRecord(0, 0, np.zeros(0), np.zeros(0, dtype=int)))
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for t in range(config.T):
            try:
                theta, rec = step(cluster, config, theta, executor)
            except ConvergenceError as exc:
                exc.iteration = t
                exc.trace = trace
                raise
            trace.record(theta, rec)
    finally:
        if executor is not None:
            executor.shutdown()
    return trace


def one_shot_average(cluster: Cluster, settings: SolverSettings | None = None) -> np.ndarray:
    """Plain average of the machines' own regularized minimizers."""
    zero = np.zeros(cluster.dim)
    total = np.zeros(cluster.dim)
    for k, s in enumerate(cluster.shards):
        prob = SurrogateProblem(s, cluster.family, cluster.penalty, zero, zero, 0.0)
        try:
            total += solve(prob, zero, settings)
        except ConvergenceError as exc:
            exc.node = k
            raise
    return total / cluster.m


def global_minimizer(cluster: Cluster, settings: SolverSettings | None = None, init=None,
                     full_output: bool = False):
    """Centralized reference solve on the pooled data (metrics only).

    Defaults to a gradient tolerance of 1e-12 for smooth penalties and a
    proximal-gradient residual of 1e-8 for L1.
    """
    if settings is None:
        tol = 1e-12 if cluster.penalty.is_smooth else 1e-8
        settings = SolverSettings(grad_tol=tol,
                                  max_inner_iters=None if cluster.penalty.is_smooth else 50000)
    zero = np.zeros(cluster.dim)
    prob = SurrogateProblem(cluster.pooled(), cluster.family, cluster.penalty, zero, zero, 0.0)
    start = zero if init is None else np.asarray(init, dtype=float)
    return solve(prob, start, settings, full_output=full_output)
