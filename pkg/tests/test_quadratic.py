import numpy as np
import pytest

from cease import GAUSSIAN, AlgoConfig, SingularSystemError, run, step
from cease.quadratic import (QuadState, cease_avg_step_closed, cease_step_closed,
                             closed_form_trace, iteration_matrix, metric_error,
                             spectral_contraction)

from conftest import random_cluster


def random_state(rng, m, d, n=40):
    sig, ws = [], []
    for _ in range(m):
        X = np.c_[np.ones(n), rng.standard_normal((n, d - 1))]
        sig.append(X.T @ X / n)
        ws.append(X.T @ rng.standard_normal(n) / n)
    return QuadState.from_moments(sig, ws)


def test_two_by_two_hand_example():
    # with S_1 = diag(2,1) and S = 1.5 I the weights must reproduce the pooled moments
    s1 = np.diag([2.0, 1.0])
    s2 = np.diag([1.0, 2.0])
    state = QuadState.from_moments([s1, s2], [np.array([3.0, 3.0])] * 2)
    assert np.allclose(state.sigma, 1.5 * np.eye(2))
    assert np.allclose(cease_step_closed(state, 0.0, np.zeros(2)), [1.5, 3.0])


def test_fixed_point_preserved_exactly(rng):
    for _ in range(10):
        state = random_state(rng, 4, 5)
        fp = state.minimizer()
        for alpha in (0.0, 0.3):
            assert np.max(np.abs(cease_step_closed(state, alpha, fp) - fp)) <= 1e-12
            assert np.max(np.abs(cease_avg_step_closed(state, alpha, fp) - fp)) <= 1e-12


def test_single_machine_one_step(rng):
    state = random_state(rng, 1, 4)
    out = cease_step_closed(state, 0.0, rng.standard_normal(4) * 10)
    assert np.allclose(out, state.minimizer(), atol=1e-10)
    assert spectral_contraction(state, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_identical_machines_average_equals_single(rng):
    base = random_state(rng, 1, 4)
    state = QuadState.from_moments(base.sigmas * 3, base.ws * 3)
    theta = rng.standard_normal(4)
    assert np.allclose(cease_avg_step_closed(state, 0.2, theta),
                       cease_step_closed(state, 0.2, theta), atol=1e-13)


def test_identical_machines_contraction_eigen_oracle(rng):
    base = random_state(rng, 1, 5)
    state = QuadState.from_moments(base.sigmas * 2, base.ws * 2)
    alpha = 0.4
    lam = np.linalg.eigvalsh(base.sigmas[0])
    # I - (S + aI)^{-1} S has eigenvalues a / (lam + a) and is normal in the S metric
    assert spectral_contraction(state, alpha) == pytest.approx(np.max(alpha / (lam + alpha)),
                                                               abs=1e-10)


def test_contraction_bounds_observed_ratios(rng):
    for _ in range(5):
        state = random_state(rng, 4, 5, n=25)
        for alpha in (0.0, 0.1, 1.0):
            for averaging in (True, False):
                eta = spectral_contraction(state, alpha, averaging)
                for _ in range(20):
                    tr = closed_form_trace(state, alpha, 5 * rng.standard_normal(5), 6, averaging)
                    e = [metric_error(state, th) for th in tr]
                    ratios = [b / a for a, b in zip(e, e[1:]) if a > 1e-10]
                    assert max(ratios) <= eta + 1e-8


def test_iteration_matrix_reproduces_step(rng):
    state = random_state(rng, 3, 4)
    A = iteration_matrix(state, 0.2)
    theta = rng.standard_normal(4)
    fp = state.minimizer()
    assert np.allclose(cease_avg_step_closed(state, 0.2, theta) - fp, A @ (theta - fp),
                       atol=1e-12)


def test_singular_machine_reported(rng):
    state = random_state(rng, 2, 3)
    state.sigmas[1] = np.zeros((3, 3))
    with pytest.raises(SingularSystemError, match="machine 1"):
        cease_avg_step_closed(state, 0.0, np.zeros(3))
    cease_avg_step_closed(state, 0.5, np.zeros(3))


def test_from_cluster_moments(rng):
    c = random_cluster(rng, [20, 30], 3, family=GAUSSIAN)
    q = QuadState.from_cluster(c)
    pooled = c.pooled()
    assert np.allclose(q.sigma, pooled.X.T @ pooled.X / pooled.n, atol=1e-14)
    assert np.allclose(q.w, pooled.X.T @ pooled.y / pooled.n, atol=1e-14)


def test_engine_agrees_with_closed_form_on_random_clusters():
    rng = np.random.default_rng(4)
    for _ in range(10):
        m = int(rng.integers(1, 9))
        p = int(rng.integers(2, 11))
        c = random_cluster(rng, [int(rng.integers(20, 101))] * m, p, family=GAUSSIAN)
        q = QuadState.from_cluster(c)
        alpha = [0.0, p / c.n, 1.0][int(rng.integers(3))]
        theta0 = rng.standard_normal(p + 1)
        for variant, avg in (("CEASE", False), ("CEASE_AVG", True)):
            tr = run(c, AlgoConfig(variant, alpha, T=5), theta0=theta0).as_array()
            ref = closed_form_trace(q, alpha, theta0, 5, avg)
            assert np.allclose(tr, ref, atol=1e-9, rtol=0)
        one, _ = step(c, AlgoConfig("CEASE_AVG", alpha), theta0)
        assert np.allclose(one, cease_avg_step_closed(q, alpha, theta0), atol=1e-10, rtol=0)
