import math

import numpy as np
import pytest
from scipy import integrate, stats

from wlsh.errors import ConfigError, DimensionMismatch
from wlsh.lsh import (
    CollisionProbability,
    LpHashFunction,
    StableSampler,
    WeightedAngularHash,
    WeightedHammingHash,
    adaptive_simpson,
    chambers_mallows_stuck,
    collision_probability,
    level_bucket,
    level_range,
    sample_hash_function,
)
from wlsh.metric import Metric, WeightVector, weighted_distance


def p1_closed(s):
    return 2 * math.atan(s) / math.pi - math.log1p(s * s) / (math.pi * s)


def p2_closed(s):
    return 1 - 2 * stats.norm.cdf(-s) - 2 / (math.sqrt(2 * math.pi) * s) * (1 - math.exp(-s * s / 2))


def stable_cdf(x, p):
    """Gil-Pelaez inversion of exp(-|t|^p)."""
    val, _ = integrate.quad(lambda t: math.sin(t * x) * math.exp(-t ** p) / t, 0, 60, limit=2000)
    return 0.5 + val / math.pi


def stable_pdf(x, p):
    val, _ = integrate.quad(lambda t: math.cos(t * x) * math.exp(-t ** p), 0, 60, limit=2000)
    return val / math.pi


def test_p2_seed_reproduces_normal_stream():
    f = sample_hash_function(2.0, 6, 1.5, 3, 3, np.ones(6), 99)
    ref = np.random.default_rng(99)
    assert np.array_equal(f.a, ref.standard_normal(6))
    assert f.b_star == ref.uniform(0.0, 27 * 1.5)


def test_b_star_range_and_determinism():
    for seed in range(200):
        f = sample_hash_function(1.0, 3, 2.0, 2, 3, np.ones(3), seed)
        assert 0.0 <= f.b_star <= 18.0
    a = sample_hash_function(1.5, 4, 1.0, 1, 2, np.ones(4), 7)
    b = sample_hash_function(1.5, 4, 1.0, 1, 2, np.ones(4), 7)
    assert np.array_equal(a.a, b.a) and a.b_star == b.b_star


def test_cauchy_abs_median():
    a = StableSampler(1.0, 5).draw(100_000)
    assert abs(np.median(np.abs(a)) - 1.0) < 0.03


def test_cms_p2_is_normal_with_variance_two():
    # exp(-t^2) is N(0, 2): CMS must agree
    x = chambers_mallows_stuck(2.0, 100_000, np.random.default_rng(1))
    assert stats.kstest(x / math.sqrt(2.0), "norm").statistic < 0.01


def test_cms_p13_kolmogorov_distance():
    x = np.sort(StableSampler(1.3, 11).draw(100_000))
    n = x.size
    idx = np.unique(np.linspace(0, n - 1, 300).astype(int))
    ks = 0.0
    for i in idx:
        F = stable_cdf(float(x[i]), 1.3)
        ks = max(ks, (i + 1) / n - F, F - i / n)
    assert ks < 0.01


def test_sample_errors():
    with pytest.raises(ConfigError):
        sample_hash_function(2.5, 3, 1.0, 1, 3, np.ones(3), 0)
    with pytest.raises(ConfigError):
        sample_hash_function(2.0, 3, 0.0, 1, 3, np.ones(3), 0)
    with pytest.raises(DimensionMismatch):
        sample_hash_function(2.0, 3, 1.0, 1, 3, np.ones(4), 0)


def test_hash_examples(rng):
    f = LpHashFunction(np.array([1.0, 0.0]), 0.0, 1.0, np.ones(2))
    assert f.hash([3.7, 9]) == 3
    g = sample_hash_function(2.0, 5, 2.0, 1, 3, rng.uniform(1, 2, 5), 3)
    g0 = LpHashFunction(g.a, 0.0, g.w, g.base_weights)
    assert g0.hash(np.zeros(5)) == 0
    with pytest.raises(DimensionMismatch):
        g.hash(np.zeros(4))


def test_hash_scalar_oracle(rng):
    for seed in range(50):
        W = rng.uniform(1, 10, 7)
        f = sample_hash_function(1.0, 7, 3.0, 4, 3, W, seed)
        x = rng.integers(0, 1000, 7)
        dot = sum(f.a[i] * (W[i] * x[i]) for i in range(7))
        assert f.hash(x) == math.floor((dot + f.b_star) / f.w)
        assert f.hash_many(x[None, :])[0] == f.hash(x)


def test_level_bucket():
    assert level_bucket(7, 3) == 2
    assert level_bucket(-1, 3) == -1
    assert level_range(-1, 3) == (-3, -1)
    for c in (2, 3, 5):
        for l in (c, c * c, c ** 3):
            for x in range(-10_000, 10_001):
                assert level_bucket(x, l * c) == level_bucket(level_bucket(x, l), c)
                lo, hi = level_range(level_bucket(x, l), l)
                assert lo <= x <= hi
    with pytest.raises(ConfigError):
        level_bucket(3, 0)


def test_adaptive_simpson():
    assert adaptive_simpson(math.sin, 0, math.pi) == pytest.approx(2.0, abs=1e-9)


def test_closed_forms():
    cp1 = CollisionProbability(Metric.lp(1), w=2.5)
    assert cp1(2.5) == pytest.approx(0.5 - math.log(2) / math.pi, abs=1e-9)
    cp2 = CollisionProbability(Metric.lp(2), w=1.0)
    for r in (0.05, 0.3, 1.0, 4.0, 30.0):
        assert cp1(r) == pytest.approx(p1_closed(2.5 / r), abs=1e-9)
        assert cp2(r) == pytest.approx(p2_closed(1.0 / r), abs=1e-9)
    assert cp2(1e-4) > 0.999
    assert cp2(100.0) < 0.02


def test_closed_forms_dense_sweep():
    # coarse panels can pass the Simpson error test by coincidence (s=4 for p=1)
    w = 7.0
    cp1 = CollisionProbability(Metric.lp(1), w=w)
    cp2 = CollisionProbability(Metric.lp(2), w=w)
    for s in np.linspace(0.05, 60.0, 1200):
        assert cp1(w / s) == pytest.approx(p1_closed(s), abs=1e-8)
        assert cp2(w / s) == pytest.approx(p2_closed(s), abs=1e-8)
    assert cp1(w / 4.0) == pytest.approx(p1_closed(4.0), abs=1e-9)


def test_other_metrics():
    assert collision_probability(CollisionProbability(Metric.angular()), math.pi / 2) == 0.5
    cp = CollisionProbability(Metric.hamming(), weight_sum=10.0)
    assert cp(4.0) == pytest.approx(0.6)
    with pytest.raises(ConfigError):
        cp(0.0)


@pytest.mark.parametrize("p", [0.5, 1.0, 1.3, 2.0])
def test_strictly_decreasing(p):
    cp = CollisionProbability(Metric.lp(p), w=1.0)
    vals = [cp(r) for r in np.geomspace(0.05, 50, 40)]
    assert all(0 < v < 1 for v in vals)
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_monte_carlo_standard_error():
    cp = CollisionProbability(Metric.lp(1.5), w=1.0)
    for r in (0.2, 1.0, 5.0):
        assert cp.standard_error(r) <= 1e-3
    # numeric |X| density from the characteristic function as oracle
    for s in (0.5, 1.0, 3.0):
        ref, _ = integrate.quad(lambda u: 2 * stable_pdf(u, 1.5) * (1 - u / s), 0, s)
        assert cp(1.0 / s) == pytest.approx(ref, abs=3e-3)


def _pair_at_distance(rng, W, r, p):
    x = rng.integers(0, 100, W.size).astype(float)
    direction = rng.normal(size=W.size)
    unit = weighted_distance(Metric.lp(p), W, direction, np.zeros(W.size))
    return x, x + direction * (r / unit)


@pytest.mark.parametrize("p", [1.0, 2.0, 1.5])
def test_empirical_collision_frequency(p, rng):
    d, w, trials = 6, 4.0, 10_000
    W = rng.uniform(1, 10, d)
    funcs = [sample_hash_function(p, d, w, 2, 3, W, 1000 + s) for s in range(trials)]
    A = np.stack([f.a for f in funcs])
    B = np.array([f.b_star for f in funcs])
    cp = CollisionProbability(Metric.lp(p), w=w)
    for r in (0.5, 2.0, 4.0, 8.0, 20.0):
        x, y = _pair_at_distance(rng, W, r, p)
        hx = np.floor((A @ (W * x) + B) / w)
        hy = np.floor((A @ (W * y) + B) / w)
        freq = float(np.mean(hx == hy))
        P = cp(r)
        sigma = math.sqrt(P * (1 - P) / trials)
        assert abs(freq - P) <= max(0.02, 3 * sigma)


def test_level_sensitivity(rng):
    d, w, trials, l = 5, 2.0, 10_000, 9
    W = rng.uniform(1, 10, d)
    funcs = [sample_hash_function(2.0, d, w, 2, 3, W, s) for s in range(trials)]
    A = np.stack([f.a for f in funcs])
    B = np.array([f.b_star for f in funcs])
    cp = CollisionProbability(Metric.lp(2), w=w)
    for r in (1.0, 3.0):
        x, y = _pair_at_distance(rng, W, r * l, 2.0)
        hx = np.floor((A @ (W * x) + B) / w) // l
        hy = np.floor((A @ (W * y) + B) / w) // l
        assert abs(float(np.mean(hx == hy)) - cp(r)) <= 0.02


def test_weighted_hamming_family(rng):
    d = 12
    W = WeightVector(0, rng.uniform(1, 5, d))
    x, y = rng.integers(0, 2, d), rng.integers(0, 2, d)
    r = weighted_distance(Metric.hamming(), W.weights, x, y)
    gen = np.random.default_rng(3)
    hits = 0
    for _ in range(10_000):
        h = WeightedHammingHash.sample(W, gen)
        hits += h.hash(x) == h.hash(y)
    P = CollisionProbability(Metric.hamming(), weight_sum=float(W.weights.sum()))(r)
    assert abs(hits / 10_000 - P) <= 0.02


def test_weighted_angular_family(rng):
    d = 8
    W = WeightVector(0, rng.uniform(1, 5, d))
    x, y = rng.normal(size=d), rng.normal(size=d)
    r = weighted_distance(Metric.angular(), W.weights, x, y)
    gen = np.random.default_rng(4)
    hits = 0
    for _ in range(10_000):
        h = WeightedAngularHash.sample(W, gen)
        hits += h.hash(x) == h.hash(y)
    assert abs(hits / 10_000 - (1 - r / math.pi)) <= 0.02
