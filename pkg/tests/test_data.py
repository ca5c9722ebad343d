import numpy as np
import pytest

from cease import BERNOULLI, global_minimizer, loss
from cease.data import (DataFormatError, DatasetBundle, SyntheticSpec, dump_bundle, file_sha256,
                        generate, load_spambase, partition, read_numeric_csv, rng_stream,
                        standardize, test_error, true_parameter)
from cease.model import Shard


def test_generation_is_bitwise_deterministic():
    a = generate(SyntheticSpec(N=500, p=7, seed=9))
    b = generate(SyntheticSpec(N=500, p=7, seed=9))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert np.array_equal(a.theta_star, b.theta_star)
    c = generate(SyntheticSpec(N=500, p=7, seed=10))
    assert not np.array_equal(a.X, c.X)


def test_streams_are_independent():
    a = rng_stream(5, "data").random(4)
    b = rng_stream(5, "partition").random(4)
    assert not np.array_equal(a, b)
    with pytest.raises(KeyError):
        rng_stream(5, "nope")


def test_zero_parameter_gives_balanced_labels():
    spec = SyntheticSpec(N=100_000, p=3, theta_star=(0.0,) * 4)
    assert abs(generate(spec).y.mean() - 0.5) <= 0.01


def test_dense_covariance_leading_eigenvalue():
    bundle = generate(SyntheticSpec(N=100_000, p=100, seed=1))
    U = bundle.X[:, 1:]
    lead = np.linalg.eigvalsh(np.cov(U, rowvar=False))[-1]
    assert abs(lead - 10.0) <= 0.5


def test_true_parameters():
    dense = true_parameter(SyntheticSpec(seed=4))
    assert dense.shape == (101,)
    assert np.linalg.norm(dense) == pytest.approx(3.0)
    sparse = true_parameter(SyntheticSpec("logistic_sparse_l1"))
    assert sparse.shape == (1001,)
    assert np.allclose(sparse[:10], 1 / np.sqrt(2)) and not sparse[10:].any()


def test_sparse_defaults_and_identity_design():
    spec = SyntheticSpec("logistic_sparse_l1", N=20_000, p=5)
    assert spec.covariance == "identity"
    U = generate(spec).X[:, 1:]
    assert np.allclose(np.cov(U, rowvar=False), np.eye(5), atol=0.05)


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec("poisson")
    with pytest.raises(ValueError):
        SyntheticSpec(p=3, theta_star=(1.0, 2.0))
    with pytest.raises(ValueError):
        SyntheticSpec(covariance="toeplitz")


def _bundle(N, p=2, seed=0):
    return generate(SyntheticSpec(N=N, p=p, seed=seed))


@pytest.mark.parametrize("N,m,sizes", [(10, 5, [2, 2, 2, 2, 2]), (11, 5, [3, 2, 2, 2, 2]),
                                       (13, 4, [4, 3, 3, 3])])
def test_partition_sizes(N, m, sizes):
    assert list(partition(_bundle(N), m).sizes) == sizes


def test_partition_contiguous_order():
    b = _bundle(10)
    c = partition(b, 2)
    assert np.array_equal(c.shards[1].X, b.X[5:])


def test_shuffled_partition_reproducible():
    b = _bundle(50)
    a1 = partition(b, 5, "shuffled", seed=3)
    a2 = partition(b, 5, "shuffled", seed=3)
    a3 = partition(b, 5, "shuffled", seed=4)
    assert all(np.array_equal(s.X, t.X) for s, t in zip(a1.shards, a2.shards))
    assert not np.array_equal(a1.shards[0].X, a3.shards[0].X)


def test_partition_errors():
    with pytest.raises(ValueError):
        partition(_bundle(4), 5)
    with pytest.raises(ValueError):
        partition(_bundle(10), 2, "striped")


def test_pooled_risk_identity():
    b = _bundle(103, p=4, seed=2)
    pooled = Shard(b.X, b.y)
    theta = np.random.default_rng(0).standard_normal(5)
    for m in (1, 2, 7, 10):
        for scheme in ("contiguous", "shuffled"):
            c = partition(b, m, scheme, seed=m)
            assert c.loss(theta) == pytest.approx(loss(pooled, BERNOULLI, theta), abs=1e-12)


def test_shuffling_keeps_pooled_minimizer():
    b = _bundle(400, p=4, seed=5)
    a = global_minimizer(partition(b, 4))
    s = global_minimizer(partition(b, 4, "shuffled", seed=1))
    assert np.allclose(a, s, atol=1e-9)


# --- error rate ----------------------------------------------------------------

def test_error_rate_examples():
    X = np.array([[1.0, 2.0], [1.0, -3.0], [1.0, 0.5]])
    theta = np.array([0.0, 1.0])
    y_clean = (X @ theta > 0).astype(float)
    assert test_error(theta, X, y_clean) == 0.0
    y = np.array([1.0, 0.0, 1.0])
    assert test_error(np.zeros(2), X, y) == pytest.approx(2 / 3)
    # hand count: predictions (1, 0, 0) against labels (0, 0, 1) -> 2 wrong of 3
    assert test_error(np.array([-1.0, 1.0]), X, np.array([0.0, 0.0, 1.0])) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        test_error(theta, np.zeros((0, 2)), np.zeros(0))


# --- files -----------------------------------------------------------------------

def write_spambase_like(path, n=300, seed=0, bad_label_row=None, short_row=None):
    rng = np.random.default_rng(seed)
    feats = np.abs(rng.standard_normal((n, 57))) * rng.uniform(0.1, 100, 57)
    feats[:, 5] = 0.0  # a constant column
    labels = (feats[:, 0] + rng.standard_normal(n) > feats[:, 0].mean()).astype(int)
    lines = []
    for i, (row, lab) in enumerate(zip(feats, labels)):
        cells = [f"{v:.6g}" for v in row] + [str(lab)]
        if i == bad_label_row:
            cells[-1] = "2"
        if i == short_row:
            cells = cells[:-3]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def test_spambase_loader_counts_and_standardization(tmp_path):
    path = write_spambase_like(tmp_path / "spam.data")
    b = load_spambase(path, test_size=100, seed=1)
    assert b.n_train + b.n_test == 300 and b.n_test == 100
    assert np.all(b.X[:, 0] == 1.0) and b.X.shape[1] == 58
    assert set(np.unique(np.r_[b.y, b.y_test])) <= {0.0, 1.0}
    feats = b.X[:, 1:]
    live = np.arange(57) != 5
    assert np.all(np.abs(feats[:, live].mean(axis=0)) <= 1e-10)
    assert np.all(np.abs(feats[:, live].var(axis=0) - 1) <= 1e-8)
    assert not feats[:, 5].any() and not b.X_test[:, 6].any()
    assert b.provenance["sha256"] == file_sha256(path)
    assert b.provenance["rows"] == 300


def test_spambase_loader_split_is_seeded(tmp_path):
    path = write_spambase_like(tmp_path / "spam.data")
    a = load_spambase(path, 50, seed=2)
    b = load_spambase(path, 50, seed=2)
    c = load_spambase(path, 50, seed=3)
    assert np.array_equal(a.y_test, b.y_test) and np.array_equal(a.X, b.X)
    assert not np.array_equal(a.X, c.X)


def test_spambase_raw_features(tmp_path):
    path = write_spambase_like(tmp_path / "spam.data")
    raw = load_spambase(path, 50, standardize_features=False)
    assert raw.X[:, 1:].max() > 10


def test_spambase_bad_label(tmp_path):
    path = write_spambase_like(tmp_path / "spam.data", bad_label_row=41)
    with pytest.raises(DataFormatError) as info:
        load_spambase(path)
    assert info.value.line == 42


def test_spambase_short_row(tmp_path):
    path = write_spambase_like(tmp_path / "spam.data", short_row=7)
    with pytest.raises(DataFormatError, match="line 8"):
        load_spambase(path, 10)


def test_non_numeric_field(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("1,2,3\n4,five,6\n")
    with pytest.raises(DataFormatError) as info:
        read_numeric_csv(path)
    assert info.value.line == 2


def test_wrong_column_count_everywhere(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("1,2,3\n4,5,6\n")
    with pytest.raises(DataFormatError, match="expected 58"):
        load_spambase(path)


def test_standardize_constant_columns():
    train = np.array([[1.0, 5.0], [3.0, 5.0]])
    out, test = standardize(train, np.array([[2.0, 7.0]]))
    assert np.allclose(out, [[-1.0, 0.0], [1.0, 0.0]])
    assert np.allclose(test, [[0.0, 0.0]])


def test_dump_round_trip(tmp_path):
    b = generate(SyntheticSpec(N=40, p=3, seed=6))
    b = DatasetBundle(b.X[:30], b.y[:30], b.theta_star, b.X[30:], b.y[30:], b.provenance)
    side = dump_bundle(b, tmp_path / "bundle.csv")
    back = read_numeric_csv(tmp_path / "bundle.csv", 4)
    assert np.array_equal(back[:, :-1], np.vstack([b.X[:, 1:], b.X_test[:, 1:]]))
    assert np.array_equal(back[:, -1], np.r_[b.y, b.y_test])
    meta = dict(line.split("=", 1) for line in side.read_text().splitlines())
    assert meta["seed"] == "6" and meta["n_train"] == "30" and meta["n_test"] == "10"
    assert meta["checksum"] == file_sha256(tmp_path / "bundle.csv")
    assert np.array_equal(np.array(meta["theta_star"].split(), dtype=float), b.theta_star)
