import math

import numpy as np
import pytest

from wlsh.errors import ConfigError, DimensionMismatch, IndexFormatError
from wlsh.metric import (
    Dataset,
    Metric,
    Point,
    WeightVector,
    brute_force_knn,
    load_dataset,
    load_weights,
    save_dataset,
    save_weights,
    weighted_distance,
    weighted_distances,
)

from conftest import random_dataset


def scalar_lp(p, w, x, y):
    total = 0.0
    for wi, xi, yi in zip(w, x, y):
        total += abs(wi * xi - wi * yi) ** p
    return total ** (1.0 / p)


def test_euclidean_unweighted():
    assert weighted_distance(Metric.lp(2), [1, 1], [3, 4], [0, 0]) == 5.0


def test_manhattan_weighted():
    assert weighted_distance(Metric.lp(1), [2, 1], [1, 2], [0, 0]) == 4.0


def test_fractional_p_matches_scalar_loop(rng):
    for _ in range(50):
        w, x, y = rng.uniform(0.1, 5, 8), rng.normal(size=8), rng.normal(size=8)
        got = weighted_distance(Metric.lp(1.5), w, x, y)
        assert got == pytest.approx(scalar_lp(1.5, w, x, y), rel=1e-12)


def test_equivalence_with_unweighted_path(rng):
    for _ in range(1000):
        p = float(rng.choice([0.5, 1.0, 1.3, 2.0]))
        w, x, y = rng.uniform(0.5, 10, 6), rng.integers(0, 100, 6), rng.integers(0, 100, 6)
        a = weighted_distance(Metric.lp(p), w, x, y)
        b = weighted_distance(Metric.lp(p), np.ones(6), w * x, w * y)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_identity_and_positivity(rng):
    for metric in (Metric.lp(1), Metric.lp(2), Metric.hamming()):
        x = rng.integers(0, 2, 10)
        y = x.copy()
        y[3] ^= 1
        w = rng.uniform(1, 3, 10)
        assert weighted_distance(metric, w, x, x) == 0.0
        assert weighted_distance(metric, w, x, y) > 0.0


def test_weight_scaling(rng):
    w, x, y = rng.uniform(1, 2, 5), rng.normal(size=5), rng.normal(size=5)
    for p in (0.7, 1.0, 2.0):
        base = weighted_distance(Metric.lp(p), w, x, y)
        assert weighted_distance(Metric.lp(p), 3 * w, x, y) == pytest.approx(3 * base)
    ang = weighted_distance(Metric.angular(), w, x, y)
    assert weighted_distance(Metric.angular(), 3 * w, x, y) == pytest.approx(ang)


def test_hamming_and_angular_values():
    assert weighted_distance(Metric.hamming(), [3, 1, 2], [1, 0, 1], [0, 0, 0]) == 5.0
    assert weighted_distance(Metric.angular(), [1, 1], [1, 0], [0, 2]) == pytest.approx(math.pi / 2)
    # parallel vectors: cosine rounding must not produce NaN
    assert weighted_distance(Metric.angular(), [0.1, 0.3], [1e8, 3e8], [1, 3]) == pytest.approx(0, abs=1e-6)


def test_errors():
    with pytest.raises(DimensionMismatch):
        weighted_distance(Metric.lp(2), [1, 1], [1, 2, 3], [0, 0, 0])
    with pytest.raises(ConfigError):
        WeightVector(0, [1.0, 0.0])
    with pytest.raises(ConfigError):
        weighted_distance(Metric.lp(2), [1, -1], [1, 2], [0, 0])
    with pytest.raises(ConfigError):
        weighted_distance(Metric.angular(), [1, 1], [0, 0], [1, 2])
    with pytest.raises(ConfigError):
        weighted_distance(Metric.hamming(), [1, 1], [0, 2], [1, 0])
    with pytest.raises(ConfigError):
        Metric.lp(2.5)


def test_vectorised_matches_scalar(rng):
    X = rng.integers(0, 50, (30, 7))
    q = rng.normal(size=7)
    w = rng.uniform(1, 4, 7)
    for metric in (Metric.lp(1), Metric.lp(2), Metric.lp(0.8), Metric.angular()):
        vec = weighted_distances(metric, w, X, q)
        for i in range(30):
            assert vec[i] == pytest.approx(weighted_distance(metric, w, X[i], q), rel=1e-12)


def test_knn_self_point(rng):
    ds = random_dataset(rng, 100, 4)
    res = brute_force_knn(ds, Metric.lp(2), np.ones(4), ds.coords[17], 1)
    assert res == [(17, 0.0)]


def test_knn_full_sort_oracle(rng):
    ds = random_dataset(rng, 100, 4, 0, 20)
    w, q = rng.uniform(1, 10, 4), rng.integers(0, 20, 4)
    metric = Metric.lp(1)
    full = sorted((scalar_lp(1, w, ds.coords[i], q), i) for i in range(ds.n))
    assert brute_force_knn(ds, metric, w, q, 10) == [(i, d) for d, i in full[:10]]
    assert [i for i, _ in brute_force_knn(ds, metric, w, q, 100)] == [i for _, i in full]


def test_knn_ties_by_id():
    ds = Dataset(np.array([[2, 0], [0, 0], [1, 0], [0, 0]]), (0, 2))
    res = brute_force_knn(ds, Metric.lp(1), [1, 1], [1, 0], 3)
    assert res == [(2, 0.0), (0, 1.0), (1, 1.0)]
    with pytest.raises(ConfigError):
        brute_force_knn(ds, Metric.lp(1), [1, 1], [1, 0], 5)


def test_dataset_range_check():
    with pytest.raises(ConfigError):
        Dataset(np.array([[0, 11]]), (0, 10))


def test_dataset_binary_roundtrip(tmp_path, rng):
    ds = random_dataset(rng, 20, 3)
    path = tmp_path / "d.bin"
    digest = save_dataset(ds, path)
    raw = path.read_bytes()
    assert raw[:8] == b"WLSHDATA"
    assert len(raw) == 8 + 4 * 5 + 20 * 3 * 4
    back = load_dataset(path)
    assert np.array_equal(back.coords, ds.coords) and back.value_range == ds.value_range
    assert back.digest == digest == ds.digest


def test_dataset_text_ingest(tmp_path):
    path = tmp_path / "d.txt"
    path.write_text("# range 0 9\n1 2 3\n4 5 6\n")
    ds = load_dataset(path)
    assert ds.n == 2 and ds.d == 3 and ds.value_range == (0, 9)


def test_dataset_truncated(tmp_path, rng):
    path = tmp_path / "d.bin"
    save_dataset(random_dataset(rng, 5, 2), path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(IndexFormatError):
        load_dataset(path)


def test_weights_roundtrip(tmp_path, rng):
    ws = [WeightVector(i, rng.uniform(1, 10, 4)) for i in range(3)]
    save_weights(ws, tmp_path / "w.txt")
    back = load_weights(tmp_path / "w.txt")
    assert [wv.id for wv in back] == [0, 1, 2]
    for a, b in zip(ws, back):
        assert np.array_equal(a.weights, b.weights)


def test_point_dimension():
    assert Point(3, np.zeros(5)).d == 5
