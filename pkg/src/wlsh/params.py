"""Table counts, collision thresholds and radius grids per weight vector.

For a target vector served by a base family, the near/far radii
``x = r_min`` and ``y = c * r_min`` of the target are lifted into the base's
distance via the l_p bounds, and the resulting collision probabilities fix
the table count ``beta`` and collision threshold ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .bounds import BoundSpec, Relaxation, lp_bounds
from .errors import ConfigError, UnassignableError
from .lsh import CollisionProbability
from .metric import Dataset, Metric, WeightVector

EPSILON = 0.01
GAMMA_FLOOR = 1e-7


@dataclass(frozen=True)
class RadiusProfile:
    r_min: float
    r_max: float
    levels: int


def levels_for_ratio(ratio: float, c: int) -> int:
    """Smallest ``L >= 0`` with ``c**L >= ratio``."""
    if ratio <= 1.0:
        return 0
    L = max(0, math.ceil(math.log(ratio) / math.log(c)) - 1)
    while c ** L < ratio:
        L += 1
    return L


def radius_profile_for_range(value_range: tuple[int, int], w_vec: WeightVector,
                             p: float, c: int) -> RadiusProfile:
    lo, hi = value_range
    if hi <= lo:
        raise ConfigError(f"degenerate value range [{lo}, {hi}]")
    w = w_vec.weights
    r_min = float(w.min())
    span = w * float(hi - lo)
    if p == 1.0:
        r_max = float(span.sum())
    elif p == 2.0:
        r_max = math.sqrt(float(span @ span))
    else:
        r_max = float((span ** p).sum() ** (1.0 / p))
    return RadiusProfile(r_min, r_max, levels_for_ratio(r_max / r_min, c))


def radius_profile(dataset: Dataset, w_vec: WeightVector, p: float, c: int) -> RadiusProfile:
    """``r_min`` is the smallest weight: integer points differing by one in one
    coordinate. ``r_max`` spans the declared value range in every dimension."""
    return radius_profile_for_range(dataset.value_range, w_vec, p, c)


def default_gamma(n: int) -> float:
    # capped at 1 so ln(2/gamma) stays positive for tiny datasets
    return min(1.0, max(GAMMA_FLOOR, 100.0 / n))


def beta_mu(P1: float, P2: float, n: int, epsilon: float = EPSILON,
            gamma: float | None = None) -> tuple[int, float]:
    if not (0.0 < P2 < P1 < 1.0):
        raise ConfigError(f"need 0 < P2 < P1 < 1, got P1={P1}, P2={P2}")
    if gamma is None:
        gamma = default_gamma(n)
    z = math.sqrt(math.log(2.0 / gamma) / math.log(1.0 / epsilon))
    beta = math.ceil(math.log(1.0 / epsilon) * (1.0 + z) ** 2 / (2.0 * (P1 - P2) ** 2))
    mu = (z * P1 + P2) / (1.0 + z) * beta
    return beta, mu


@dataclass(frozen=True)
class VectorParams:
    beta: int
    mu: float
    mu_reduced: float
    x_up: float
    y_down: float


def vector_params(
    base: WeightVector,
    target: WeightVector,
    profile: RadiusProfile,
    cp: CollisionProbability,
    c: int,
    n: int,
    relaxation: Relaxation | None = None,
    reduction: bool = False,
    epsilon: float = EPSILON,
    gamma: float | None = None,
) -> VectorParams:
    """Parameters for answering queries under ``target`` with tables of ``base``.

    ``mu_reduced`` is always computed; ``reduction`` only controls whether it
    must be strictly below ``mu``.
    """
    spec = BoundSpec(cp.metric, base, target, relaxation)
    x_up, y_down = lp_bounds(spec, profile.r_min, c)
    if not (0.0 < x_up < y_down):
        raise UnassignableError(base.id, target.id, x_up, y_down)
    p1, p2 = cp(x_up), cp(y_down)
    if not p1 > p2:
        raise UnassignableError(base.id, target.id, x_up, y_down)
    beta, mu = beta_mu(p1, p2, n, epsilon, gamma)
    far_up, _ = lp_bounds(spec, c * c * profile.r_min, c)
    mu_reduced = cp(far_up) / p1 * mu
    if reduction and not mu_reduced < mu:
        raise ConfigError("reduced collision threshold is not below the plain one")
    return VectorParams(beta, mu, mu_reduced, x_up, y_down)


@dataclass
class GroupParams:
    base: int
    members: list[tuple[int, VectorParams]]
    beta_group: int
    w_bucket: float
    b_range_levels: int

    @property
    def member_ids(self) -> list[int]:
        return [m for m, _ in self.members]

    def params_for(self, wid: int) -> VectorParams:
        for m, vp in self.members:
            if m == wid:
                return vp
        raise KeyError(wid)


@dataclass
class SolverContext:
    """Caches per-vector profiles and per-(base, target) parameters.

    Everything the partitioner needs to evaluate candidate groups for one
    weight-vector set on one dataset shape.
    """

    weights: Sequence[WeightVector]
    value_range: tuple[int, int]
    n: int
    p: float = 2.0
    c: int = 3
    relaxation: Relaxation | None = None
    reduction: bool = False
    epsilon: float = EPSILON
    gamma: float | None = None
    _profiles: dict[int, RadiusProfile] = field(default_factory=dict, repr=False)
    _pairs: dict[tuple[int, int], VectorParams | None] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not isinstance(self.c, int) or self.c < 2:
            raise ConfigError(f"c must be an integer >= 2, got {self.c!r}")
        if self.n < 1:
            raise ConfigError("dataset must contain at least one point")
        self.metric = Metric.lp(self.p)
        self.by_id = {wv.id: wv for wv in self.weights}
        if len(self.by_id) != len(self.weights):
            raise ConfigError("weight vector ids must be unique")
        if len({wv.d for wv in self.weights}) > 1:
            raise ConfigError("weight vectors have differing dimensionality")
        if self.relaxation is not None:
            self.relaxation.check(self.weights[0].d)
        if self.gamma is None:
            self.gamma = default_gamma(self.n)

    def profile(self, wid: int) -> RadiusProfile:
        prof = self._profiles.get(wid)
        if prof is None:
            prof = radius_profile_for_range(self.value_range, self.by_id[wid], self.p, self.c)
            self._profiles[wid] = prof
        return prof

    def collision(self, base_id: int) -> CollisionProbability:
        return CollisionProbability(self.metric, w=self.profile(base_id).r_min)

    def pair(self, base_id: int, target_id: int) -> VectorParams | None:
        """Parameters of ``target`` under ``base``; None when unassignable."""
        key = (base_id, target_id)
        if key not in self._pairs:
            try:
                self._pairs[key] = vector_params(
                    self.by_id[base_id],
                    self.by_id[target_id],
                    self.profile(target_id),
                    self.collision(base_id),
                    self.c,
                    self.n,
                    self.relaxation,
                    self.reduction,
                    self.epsilon,
                    self.gamma,
                )
            except UnassignableError:
                self._pairs[key] = None
        return self._pairs[key]

    def self_beta(self, wid: int) -> int:
        vp = self.pair(wid, wid)
        if vp is None:  # a vector always fits its own family
            raise AssertionError("self pair unassignable")
        return vp.beta

    def tau_min(self) -> int:
        return max(self.self_beta(wv.id) for wv in self.weights)

    def naive_total(self) -> int:
        return sum(self.self_beta(wv.id) for wv in self.weights)

    def group_params(self, base_id: int, member_ids: Sequence[int]) -> GroupParams:
        return group_params(self, base_id, member_ids)


def group_params(ctx: SolverContext, base_id: int, member_ids: Sequence[int]) -> GroupParams:
    if not member_ids:
        raise ConfigError("a group needs at least one member")
    members = []
    for m in sorted(member_ids):
        vp = ctx.pair(base_id, m)
        if vp is None:
            spec = BoundSpec(ctx.metric, ctx.by_id[base_id], ctx.by_id[m], ctx.relaxation)
            x_up, y_down = lp_bounds(spec, ctx.profile(m).r_min, ctx.c)
            raise UnassignableError(base_id, m, x_up, y_down)
        members.append((m, vp))
    ratio = max(ctx.profile(m).r_max / ctx.profile(m).r_min for m, _ in members)
    return GroupParams(
        base=base_id,
        members=members,
        beta_group=max(vp.beta for _, vp in members),
        w_bucket=ctx.profile(base_id).r_min,
        b_range_levels=levels_for_ratio(ratio, ctx.c),
    )
