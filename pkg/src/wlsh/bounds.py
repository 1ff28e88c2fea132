"""Distance bounds for reusing one weighted family under another weight vector.

Given tables built for weights ``W`` (the base) and a query under ``W'`` (the
target), a point within ``R`` of the query under ``W'`` lies within ``R_up``
under ``W``, and a point beyond ``cR`` under ``W'`` lies beyond ``cR_down``
under ``W``. The derived family is only useful when ``R_up < cR_down``.

Relaxed bounds replace the extreme weight ratios with order statistics. They
are heuristics: containment is no longer guaranteed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .metric import Metric, WeightVector


@dataclass(frozen=True)
class Relaxation:
    v: int
    v_prime: int

    def check(self, d: int) -> None:
        if not (1 <= self.v <= d + 1 - self.v_prime <= d):
            raise ConfigError(
                f"relaxation requires 1 <= v <= d+1-v' <= d; got v={self.v}, v'={self.v_prime}, d={d}"
            )


@dataclass(frozen=True)
class BoundSpec:
    metric: Metric
    base: WeightVector
    target: WeightVector
    relaxation: Relaxation | None = None

    def __post_init__(self):
        if self.base.d != self.target.d:
            raise DimensionMismatch(
                f"base has d={self.base.d}, target has d={self.target.d}"
            )
        if self.relaxation is not None:
            self.relaxation.check(self.base.d)

    def ratios(self) -> np.ndarray:
        """``T = {w_i / w'_i}`` sorted descending."""
        return np.sort(self.base.weights / self.target.weights)[::-1]

    def ratio_bounds(self) -> tuple[float, float]:
        """(upper ratio, lower ratio) used to scale ``R`` and ``cR``."""
        t = self.ratios()
        if self.relaxation is None:
            return float(t[0]), float(t[-1])
        d = t.size
        # T^(j) is the j-th largest, 1-based
        return float(t[self.relaxation.v - 1]), float(t[d - self.relaxation.v_prime])


def _check_radius(R: float, c: int) -> None:
    if not R > 0:
        raise ConfigError(f"radius must be positive, got {R}")
    if c < 2:
        raise ConfigError(f"c must be >= 2, got {c}")


def lp_bounds(spec: BoundSpec, R: float, c: int) -> tuple[float, float]:
    _check_radius(R, c)
    if spec.metric.kind != "lp":
        raise ConfigError(f"lp_bounds called with metric {spec.metric}")
    hi, lo = spec.ratio_bounds()
    return R * hi, c * R * lo


def hamming_bounds(spec: BoundSpec, R: float, c: int) -> tuple[float, float]:
    _check_radius(R, c)
    if spec.metric.kind != "hamming":
        raise ConfigError(f"hamming_bounds called with metric {spec.metric}")
    hi, lo = spec.ratio_bounds()
    return R * hi, c * R * lo


def angular_bounds(spec: BoundSpec, R: float, c: int,
                   fixed_division: bool = False) -> tuple[float, float]:
    """Angular bounds; results for ``cR > pi`` are computed but not meaningful.

    With ``M``/``N`` the largest/smallest squared weight ratio, the cosine
    under the base is at least ``Z / M`` when ``Z = M cos R + N - M >= 0`` and
    at least ``Z / N`` otherwise (the norm product lies in ``[N S', M S']`` and
    the division must use the end that keeps the inequality valid); the far
    bound mirrors this. ``fixed_division=True`` always divides by ``M`` (near) and
    ``N`` (far), which can under-cover when the lifted cosine is negative.
    """
    _check_radius(R, c)
    if spec.metric.kind != "angular":
        raise ConfigError(f"angular_bounds called with metric {spec.metric}")
    sq = (spec.base.weights / spec.target.weights) ** 2
    M = float(sq.max())
    N = float(sq.min())
    z = M * math.cos(R) + N - M
    y0 = M * math.cos(c * R) + M - N
    if fixed_division:
        x, y = z / M, y0 / N
    else:
        x = z / M if z >= 0 else z / N
        y = y0 / N if y0 >= 0 else y0 / M
    return math.acos(max(-1.0, min(1.0, x))), math.acos(min(1.0, max(-1.0, y)))


def bounds(spec: BoundSpec, R: float, c: int) -> tuple[float, float]:
    kind = spec.metric.kind
    if kind == "lp":
        return lp_bounds(spec, R, c)
    if kind == "hamming":
        return hamming_bounds(spec, R, c)
    return angular_bounds(spec, R, c)


def usable(spec: BoundSpec, R: float, c: int) -> bool:
    r_up, cr_down = bounds(spec, R, c)
    return r_up < cr_down
