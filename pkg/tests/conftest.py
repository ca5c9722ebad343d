"""Shared builders for small random problems."""

import numpy as np
import pytest

from cease import BERNOULLI, GAUSSIAN, Cluster, Penalty, Shard


def design(rng, n, p):
    return np.hstack([np.ones((n, 1)), rng.standard_normal((n, p))])


def logistic_shard(rng, n, p, scale=1.0):
    X = design(rng, n, p)
    theta = scale * rng.standard_normal(p + 1) / np.sqrt(p + 1)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-X @ theta))).astype(float)
    return Shard(X, y)


def gaussian_shard(rng, n, p):
    X = design(rng, n, p)
    y = X @ rng.standard_normal(p + 1) + rng.standard_normal(n)
    return Shard(X, y)


def random_cluster(rng, sizes, p, family=BERNOULLI, penalty=None):
    make = logistic_shard if family is BERNOULLI else gaussian_shard
    return Cluster([make(rng, n, p) for n in sizes], family, penalty or Penalty())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number, status, detail):
        if not isinstance(status, str):
            status = "PASS" if status else "FAIL"
        lines.append((number, status, detail))
        print(f"criterion {number}: {status}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, status, detail in sorted(lines, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:2d}: {status:7s} {detail}")
