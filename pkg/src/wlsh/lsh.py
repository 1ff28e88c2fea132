"""Weighted LSH families and their collision probabilities.

The l_p family hashes ``x`` to ``floor((a . (W * x) + b*) / w)`` where ``a``
holds i.i.d. p-stable draws. Level-``l`` buckets are obtained from level-1
buckets by floor division (virtual rehashing), so a single table serves every
search radius.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .metric import Metric, Point, WeightVector

SIMPSON_TOL = 1e-9
SIMPSON_MAX_DEPTH = 60
SIMPSON_MIN_DEPTH = 4
MC_SAMPLES = 1 << 20
MC_SEED = 0x5EED_CAFE


# ---------------------------------------------------------------------------
# p-stable sampling


def chambers_mallows_stuck(p: float, size, rng: np.random.Generator) -> np.ndarray:
    """Symmetric p-stable draws with characteristic function ``exp(-|t|^p)``."""
    v = rng.uniform(-math.pi / 2, math.pi / 2, size)
    e = rng.exponential(1.0, size)
    if p == 1.0:
        return np.tan(v)
    return (
        np.sin(p * v)
        / np.cos(v) ** (1.0 / p)
        * (np.cos(v - p * v) / e) ** ((1.0 - p) / p)
    )


@dataclass
class StableSampler:
    """Seeded source of p-stable variates.

    ``p=2`` yields standard normal draws and ``p=1`` standard Cauchy draws; any
    other ``p`` in (0, 2) goes through Chambers-Mallows-Stuck.
    """

    p: float
    seed: int

    def __post_init__(self):
        if not (0.0 < self.p <= 2.0):
            raise ConfigError(f"p must lie in (0, 2], got {self.p}")
        self._rng = np.random.default_rng(self.seed)

    def draw(self, size) -> np.ndarray:
        if self.p == 2.0:
            return self._rng.standard_normal(size)
        if self.p == 1.0:
            return self._rng.standard_cauchy(size)
        return chambers_mallows_stuck(self.p, size, self._rng)

    def uniform(self, lo: float, hi: float) -> float:
        return float(self._rng.uniform(lo, hi))


# ---------------------------------------------------------------------------
# l_p hash functions


@dataclass(frozen=True)
class LpHashFunction:
    a: np.ndarray
    b_star: float
    w: float
    base_weights: np.ndarray

    @property
    def d(self) -> int:
        return self.a.size

    def project(self, X: np.ndarray) -> np.ndarray:
        """``a . (W * x) + b*`` for each row of ``X`` (or a single vector)."""
        X = np.asarray(X, dtype=np.float64)
        return (X * self.base_weights) @ self.a + self.b_star

    def hash(self, x) -> int:
        if isinstance(x, Point):
            x = x.coords
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise DimensionMismatch(f"point has shape {x.shape}, hash function expects ({self.d},)")
        return int(math.floor(float(self.project(x)) / self.w))

    def hash_many(self, X: np.ndarray) -> np.ndarray:
        return np.floor(self.project(X) / self.w).astype(np.int64)


def sample_hash_function(
    p: float,
    d: int,
    w: float,
    b_range_levels: int,
    c: int,
    base: WeightVector | np.ndarray,
    rng_seed: int,
) -> LpHashFunction:
    """Draw one function from the weighted family with ``b*`` uniform on
    ``[0, c**b_range_levels * w]``."""
    if not (0.0 < p <= 2.0):
        raise ConfigError(f"p must lie in (0, 2], got {p}")
    if not w > 0:
        raise ConfigError(f"bucket width must be positive, got {w}")
    if c < 2 or b_range_levels < 0:
        raise ConfigError("need c >= 2 and b_range_levels >= 0")
    weights = base.weights if isinstance(base, WeightVector) else np.asarray(base, dtype=np.float64)
    if weights.size != d:
        raise DimensionMismatch(f"base weights have {weights.size} entries, expected {d}")
    sampler = StableSampler(p, rng_seed)
    a = sampler.draw(d)
    b_star = sampler.uniform(0.0, float(c) ** b_range_levels * w)
    a.setflags(write=False)
    return LpHashFunction(a, b_star, float(w), weights)


def hash_point(f: LpHashFunction, x) -> int:
    return f.hash(x)


def level_bucket(bucket: int, l: int) -> int:
    """Level-``l`` bucket containing level-1 bucket ``bucket`` (floor toward -inf)."""
    if l < 1:
        raise ConfigError(f"level must be >= 1, got {l}")
    return bucket // l


def level_range(level_bucket_id: int, l: int) -> tuple[int, int]:
    """Inclusive range of level-1 buckets making up a level-``l`` bucket."""
    return level_bucket_id * l, level_bucket_id * l + l - 1


# ---------------------------------------------------------------------------
# Hamming and angular weighted families (library types only)


@dataclass(frozen=True)
class WeightedHammingHash:
    """``h(x) = w_k * x_k`` with coordinate ``k`` drawn proportionally to ``w_k``."""

    k: int
    weights: np.ndarray

    @classmethod
    def sample(cls, weights: WeightVector | np.ndarray, rng: np.random.Generator):
        w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, float)
        return cls(int(rng.choice(w.size, p=w / w.sum())), w)

    def hash(self, x) -> float:
        x = x.coords if isinstance(x, Point) else np.asarray(x)
        return float(self.weights[self.k] * x[self.k])


@dataclass(frozen=True)
class WeightedAngularHash:
    """``h(x) = sign(u . (W * x))`` with ``u`` standard normal."""

    u: np.ndarray
    weights: np.ndarray

    @classmethod
    def sample(cls, weights: WeightVector | np.ndarray, rng: np.random.Generator):
        w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, float)
        return cls(rng.standard_normal(w.size), w)

    def hash(self, x) -> int:
        x = x.coords if isinstance(x, Point) else np.asarray(x, dtype=np.float64)
        return 1 if float(self.u @ (self.weights * x)) >= 0 else -1


# ---------------------------------------------------------------------------
# collision probabilities


def adaptive_simpson(f, a: float, b: float, tol: float = SIMPSON_TOL,
                     max_depth: int = SIMPSON_MAX_DEPTH,
                     min_depth: int = SIMPSON_MIN_DEPTH) -> float:
    """Adaptive Simpson quadrature of ``f`` over ``[a, b]`` to absolute ``tol``.

    The first ``min_depth`` levels are always split: a coarse panel can pass
    the error test by coincidence (whole and halves agreeing while both are
    wrong), which happens for the Cauchy integrand at ``s = 4``.
    """
    fa, fm, fb = f(a), f((a + b) / 2), f(b)
    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    # explicit stack; each entry is one panel awaiting refinement
    stack = [(a, b, fa, fm, fb, whole, tol, max_depth)]
    total = 0.0
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        delta = left + right - whole
        forced = max_depth - depth < min_depth
        if depth <= 0 or (not forced and abs(delta) <= 15 * eps):
            total += left + right + delta / 15
        else:
            stack.append((a, m, fa, flm, fm, left, eps / 2, depth - 1))
            stack.append((m, b, fm, frm, fb, right, eps / 2, depth - 1))
    return total


_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _half_normal_pdf(u: float) -> float:
    return _SQRT_2_OVER_PI * math.exp(-0.5 * u * u)


def _half_cauchy_pdf(u: float) -> float:
    return 2.0 / (math.pi * (1.0 + u * u))


@functools.lru_cache(maxsize=1 << 16)
def _lp_collision_quadrature(p: float, s: float) -> float:
    # substitute u = t / r; s = w / r is the only free parameter
    pdf = _half_normal_pdf if p == 2.0 else _half_cauchy_pdf
    if p == 2.0 and s > 40.0:
        # Gaussian mass beyond u=40 is below 1e-300; integrate the supported part
        return adaptive_simpson(lambda u: pdf(u) * (1.0 - u / s), 0.0, 40.0)
    return adaptive_simpson(lambda u: pdf(u) * (1.0 - u / s), 0.0, s)


@functools.lru_cache(maxsize=8)
def _stable_abs_table(p: float) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(MC_SEED)
    x = np.sort(np.abs(chambers_mallows_stuck(p, MC_SAMPLES, rng)))
    return x, np.concatenate(([0.0], np.cumsum(x)))


def _lp_collision_monte_carlo(p: float, s: float) -> tuple[float, float]:
    x, prefix = _stable_abs_table(p)
    k = int(np.searchsorted(x, s, side="left"))
    n = x.size
    mean = (k - prefix[k] / s) / n
    # second moment of (1 - |X|/s)_+ for the standard error
    head = x[:k] / s
    second = float(np.sum((1.0 - head) ** 2)) / n
    se = math.sqrt(max(second - mean * mean, 0.0) / n)
    return float(mean), se


@dataclass(frozen=True)
class CollisionProbability:
    """Collision probability ``P(r)`` of a weighted family.

    For l_p, ``w`` is the bucket width. For Hamming, ``weight_sum`` is the sum of
    the family's weights. Angular needs no parameter.
    """

    metric: Metric
    w: float = 1.0
    weight_sum: float | None = None

    def __call__(self, r: float) -> float:
        return collision_probability(self, r)

    def standard_error(self, r: float) -> float:
        """Zero for quadrature-backed and closed-form cases."""
        if self.metric.kind == "lp" and self.metric.p not in (1.0, 2.0):
            return _lp_collision_monte_carlo(self.metric.p, self.w / r)[1]
        return 0.0


def collision_probability(cp: CollisionProbability, r: float) -> float:
    if not r > 0:
        raise ConfigError(f"collision probability needs r > 0, got {r}")
    kind = cp.metric.kind
    if kind == "lp":
        s = cp.w / r
        if cp.metric.p in (1.0, 2.0):
            return _lp_collision_quadrature(cp.metric.p, s)
        return _lp_collision_monte_carlo(cp.metric.p, s)[0]
    if kind == "hamming":
        if cp.weight_sum is None:
            raise ConfigError("Hamming collision probability needs weight_sum")
        return 1.0 - r / cp.weight_sum
    return 1.0 - r / math.pi
