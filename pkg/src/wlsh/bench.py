"""Experimental protocol at desk scale: data, weight and query generators, the
space/efficiency/accuracy metrics, and space calculators for two asymmetric
LSH baselines (SL-ALSH, S2-ALSH).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bounds import Relaxation
from .errors import ConfigError
from .index import build_index
from .metric import Dataset, Metric, Point, WeightVector, brute_force_knn
from .params import SolverContext
from .partition import naive_plan, partition
from .query import QueryResult, search

log = logging.getLogger(__name__)

DEFAULT_RANGE = (0, 10000)
WEIGHT_RANGE = (1.0, 10.0)


# ---------------------------------------------------------------------------
# generators


def gen_synthetic_dataset(n: int, d: int, value_range: tuple[int, int] = DEFAULT_RANGE,
                          seed: int = 0) -> Dataset:
    """``n * d`` i.i.d. uniform integers in the closed ``value_range``."""
    if n < 1 or d < 1:
        raise ConfigError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    lo, hi = value_range
    if hi <= lo:
        raise ConfigError(f"degenerate value range [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    return Dataset(rng.integers(lo, hi, size=(n, d), endpoint=True, dtype=np.int32), (lo, hi))


@dataclass(frozen=True)
class WeightGenSpec:
    cardinality: int
    n_subset: int
    n_subrange: int
    d: int
    weight_range: tuple[float, float] = WEIGHT_RANGE
    seed: int = 0

    def check(self) -> None:
        if self.cardinality < 1 or self.n_subset < 1 or self.n_subrange < 1 or self.d < 1:
            raise ConfigError("cardinality, n_subset, n_subrange and d must all be >= 1")
        if self.cardinality % self.n_subset:
            raise ConfigError(
                f"|S|={self.cardinality} is not divisible by #Subset={self.n_subset}"
            )
        lo, hi = self.weight_range
        if not 0 < lo < hi:
            raise ConfigError(f"invalid weight range {self.weight_range}")


def gen_weight_vectors(spec: WeightGenSpec) -> list[WeightVector]:
    """Equal-size subsets; each subset fixes one subrange per dimension and its
    members draw weights uniformly inside those subranges."""
    spec.check()
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.weight_range
    width = (hi - lo) / spec.n_subrange
    per_subset = spec.cardinality // spec.n_subset
    out: list[WeightVector] = []
    for _ in range(spec.n_subset):
        start = lo + width * rng.integers(0, spec.n_subrange, size=spec.d)
        for _ in range(per_subset):
            w = start + width * rng.random(spec.d)
            out.append(WeightVector(len(out), w))
    return out


@dataclass
class QuerySet:
    points: list[Point]
    weight_ids: list[int]
    dataset: Dataset

    @property
    def queries(self) -> list[tuple[Point, int]]:
        return [(pt, wid) for pt in self.points for wid in self.weight_ids]

    def __len__(self) -> int:
        return len(self.points) * len(self.weight_ids)


def gen_query_set(dataset: Dataset, weights: Sequence[WeightVector], n_points: int = 50,
                  n_vectors: int = 10, seed: int = 0) -> QuerySet:
    """Remove ``n_points`` random points from ``dataset`` and cross them with
    ``n_vectors`` weight vectors drawn without replacement.

    Query point ids are their row indices in the original dataset; the
    returned dataset is what gets indexed.
    """
    if not 1 <= n_points < dataset.n:
        raise ConfigError(f"n_points must be in [1, n), got {n_points} for n={dataset.n}")
    if not 1 <= n_vectors <= len(weights):
        raise ConfigError(f"n_vectors must be in [1, |S|={len(weights)}], got {n_vectors}")
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(dataset.n, size=n_points, replace=False))
    wids = sorted(int(weights[i].id) for i in rng.choice(len(weights), n_vectors, replace=False))
    points = [Point(int(i), dataset.coords[i].copy()) for i in picked]
    return QuerySet(points, wids, dataset.without(picked))


# ---------------------------------------------------------------------------
# accuracy


def rank_ratios(reported, truth: Sequence[tuple[int, float]]) -> list[float | None]:
    """Per-rank distance ratios; ``None`` marks an excluded rank.

    A zero true distance yields 1.0 if the reported distance is also zero and
    is excluded otherwise. Ranks the search did not fill are excluded too.
    """
    if isinstance(reported, QueryResult):
        reported = reported.neighbors
    out: list[float | None] = []
    for i, (_, true_d) in enumerate(truth):
        if i >= len(reported):
            out.append(None)
            continue
        rep_d = reported[i][1]
        if true_d == 0.0:
            out.append(1.0 if rep_d == 0.0 else None)
        else:
            out.append(rep_d / true_d)
    return out


def overall_ratio(reported, truth: Sequence[tuple[int, float]]) -> float:
    """Mean of reported / exact distance over the ranks; NaN if all excluded."""
    vals = [r for r in rank_ratios(reported, truth) if r is not None]
    return float(np.mean(vals)) if vals else math.nan


# ---------------------------------------------------------------------------
# asymmetric-LSH space calculators


@dataclass(frozen=True)
class RhoGrid:
    w_lo: float = 0.5
    w_hi: float = 50.0
    n_w: int = 128
    n_v: int = 128

    def widths(self) -> np.ndarray:
        return np.geomspace(self.w_lo, self.w_hi, self.n_w)

    def spans(self) -> np.ndarray:
        return math.pi * np.arange(1, self.n_v + 1) / self.n_v

    def refined(self) -> "RhoGrid":
        return RhoGrid(self.w_lo, self.w_hi, 2 * self.n_w, 2 * self.n_v)


_erfc = np.frompyfunc(math.erfc, 1, 1)


def p_l2(r: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Gaussian-projection collision probability for distance ``r``, width ``w``."""
    s = np.asarray(w, dtype=np.float64) / np.asarray(r, dtype=np.float64)
    tail = np.asarray(_erfc(s / math.sqrt(2.0)), dtype=np.float64)  # 2 * Phi(-s)
    return 1.0 - tail - 2.0 / (math.sqrt(2.0 * math.pi) * s) * (1.0 - np.exp(-s * s / 2.0))


def eta(weights: Sequence[WeightVector]) -> np.ndarray:
    """``sqrt(d) * ||W||_2`` after rescaling each vector to unit l1 norm."""
    out = []
    for wv in weights:
        w = wv.weights / wv.weights.sum()
        out.append(math.sqrt(w.size) * float(np.sqrt(w @ w)))
    return np.asarray(out)


@dataclass(frozen=True)
class RhoResult:
    kind: str
    rho: float
    L: float
    w: float | None
    V: float


def alsh_rho(kind: str, weights: Sequence[WeightVector], R: float, c: float, n: int,
             grid: RhoGrid = RhoGrid()) -> RhoResult:
    """Grid minimisation over (w, V) for SL or V for S2 of the worst case over
    ``weights``; ``L = n ** rho`` tables.

    Raises ConfigError when no grid point satisfies ``cR - V**4/12 > R`` (and,
    for S2, keeps both arccos arguments inside [-1, 1]).
    """
    kind = kind.upper()
    if kind not in ("SL", "S2"):
        raise ConfigError(f"unknown ALSH kind {kind!r}")
    if not R > 0 or not c > 1 or n < 2 or not weights:
        raise ConfigError("need R > 0, c > 1, n >= 2 and a nonempty weight set")
    et = eta(weights)
    V = grid.spans()
    V = V[c * R - V ** 4 / 12.0 > R]
    if kind == "SL":
        if V.size == 0:
            raise ConfigError(f"no V in (0, pi] satisfies cR - V^4/12 > R at c={c}, R={R}")
        w = grid.widths()
        near = np.sqrt(2.0 * et - 2.0 + R)  # (|S|,)
        far = np.sqrt(2.0 * et[None, :] - 2.0 + c * R - V[:, None] ** 4 / 12.0)  # (V, |S|)
        num = np.log(p_l2(near[None, :], w[:, None]))  # (w, |S|)
        den = np.log(p_l2(far[None, :, :], w[:, None, None]))  # (w, V, |S|)
        worst = (num[:, None, :] / den).max(axis=2)
        iw, iv = np.unravel_index(int(np.argmin(worst)), worst.shape)
        rho = float(worst[iw, iv])
        return RhoResult("SL", rho, float(n) ** rho, float(w[iw]), float(V[iv]))
    near_arg = (1.0 - R / 2.0) / et
    far_arg = (1.0 - c * R / 2.0 + V[:, None] ** 4 / 24.0) / et[None, :]
    if np.any(np.abs(near_arg) > 1.0):
        raise ConfigError(f"S2 near-radius arccos argument leaves [-1, 1] at R={R}")
    V = V[np.all(np.abs(far_arg) <= 1.0, axis=1)]
    far_arg = far_arg[np.all(np.abs(far_arg) <= 1.0, axis=1)]
    if V.size == 0:
        raise ConfigError(f"S2 has no feasible V at c={c}, R={R}")
    num = np.log(1.0 - np.arccos(near_arg) / math.pi)
    den = np.log(1.0 - np.arccos(far_arg) / math.pi)
    worst = (num[None, :] / den).max(axis=1)
    iv = int(np.argmin(worst))
    rho = float(worst[iv])
    return RhoResult("S2", rho, float(n) ** rho, None, float(V[iv]))


# ---------------------------------------------------------------------------
# benchmark driver


@dataclass
class BenchConfig:
    n: int = 10_000
    d: int = 32
    value_range: tuple[int, int] = DEFAULT_RANGE
    cardinality: int = 64
    n_subset: int = 8
    n_subrange: int = 8
    p: float = 2.0
    c: int = 3
    k: int = 10
    tau: int | None = None
    relaxation: Relaxation | None = None
    reduction: bool = False
    naive: bool = False
    n_points: int = 50
    n_vectors: int = 10
    seed: int = 0
    workers: int = 1

    def resolved_tau(self) -> int:
        if self.tau is not None:
            return self.tau
        return 1000 if self.p == 1.0 else 500


@dataclass
class QueryRecord:
    query_point_id: int
    weight_id: int
    k: int
    io_bucket: int
    io_candidate: int
    ratio: float
    radius_final: float
    candidates_checked: int
    rank_ratios: list[float | None] = field(default_factory=list, repr=False)


@dataclass
class BenchReport:
    beta_total: int
    naive_total: int
    n_groups: int
    avg_io: float
    avg_io_bucket: float
    avg_io_candidate: float
    avg_overall_ratio: float
    frac_rank_within_c: float
    excluded_ranks: int
    build_seconds: float
    query_seconds: float
    records: list[QueryRecord] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        out = asdict(self)
        out.pop("records")
        out["n_queries"] = len(self.records)
        return out


def _seeds(seed: int) -> tuple[int, int, int, int]:
    s = np.random.SeedSequence(seed).generate_state(4, np.uint32)
    return tuple(int(x) for x in s)


def run_benchmark(config: BenchConfig, dataset: Dataset | None = None,
                  weights: Sequence[WeightVector] | None = None,
                  queries: QuerySet | None = None) -> BenchReport:
    """Plan, build and query one configuration; any of the inputs may be
    supplied instead of generated."""
    s_data, s_weights, s_queries, s_index = _seeds(config.seed)
    if queries is None:
        if dataset is None:
            dataset = gen_synthetic_dataset(config.n, config.d, config.value_range, s_data)
        if weights is None:
            weights = gen_weight_vectors(WeightGenSpec(
                config.cardinality, config.n_subset, config.n_subrange, dataset.d, seed=s_weights))
        queries = gen_query_set(dataset, weights, config.n_points, config.n_vectors, s_queries)
    elif weights is None:
        raise ConfigError("a query set needs its weight vectors")
    indexed = queries.dataset
    metric = Metric.lp(config.p)

    t0 = time.perf_counter()
    ctx = SolverContext(list(weights), indexed.value_range, indexed.n, config.p, config.c,
                        config.relaxation, config.reduction)
    tau = config.resolved_tau()
    plan = naive_plan(ctx) if config.naive else partition(ctx, tau)
    index = build_index(indexed, plan, s_index)
    build_s = time.perf_counter() - t0
    by_id = {wv.id: wv for wv in weights}

    def run_one(item: tuple[Point, int]) -> QueryRecord:
        pt, wid = item
        res = search(index, indexed, pt.coords, wid, config.k)
        truth = brute_force_knn(indexed, metric, by_id[wid], pt.coords, config.k)[: config.k]
        rr = rank_ratios(res, truth)
        return QueryRecord(pt.id, wid, config.k, res.io.bucket_blocks_read,
                           res.io.candidate_blocks_read, overall_ratio(res, truth),
                           res.radius_final, res.candidates_checked, rr)

    t0 = time.perf_counter()
    items = queries.queries
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            records = list(pool.map(run_one, items))
    else:
        records = [run_one(it) for it in items]
    query_s = time.perf_counter() - t0

    io_b = np.array([r.io_bucket for r in records], dtype=np.float64)
    io_c = np.array([r.io_candidate for r in records], dtype=np.float64)
    ratios = np.array([r.ratio for r in records])
    ranks = [x for r in records for x in r.rank_ratios]
    kept = [x for x in ranks if x is not None]
    report = BenchReport(
        beta_total=plan.beta_total,
        naive_total=ctx.naive_total(),
        n_groups=len(plan.groups),
        avg_io=float((io_b + io_c).mean()),
        avg_io_bucket=float(io_b.mean()),
        avg_io_candidate=float(io_c.mean()),
        avg_overall_ratio=float(np.nanmean(ratios)) if np.isfinite(ratios).any() else math.nan,
        frac_rank_within_c=float(np.mean(np.array(kept) <= config.c)) if kept else math.nan,
        excluded_ranks=len(ranks) - len(kept),
        build_seconds=build_s,
        query_seconds=query_s,
        records=records,
    )
    log.info("bench: beta_S=%d naive=%d avg_io=%.1f ratio=%.4f", report.beta_total,
             report.naive_total, report.avg_io, report.avg_overall_ratio)
    return report


CSV_COLUMNS = ["query_point_id", "weight_id", "k", "io_bucket", "io_candidate", "ratio",
               "radius_final", "candidates_checked"]


def write_report(report: BenchReport, csv_path: str | Path | None = None,
                 json_path: str | Path | None = None) -> None:
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(CSV_COLUMNS)
            for r in report.records:
                wr.writerow([getattr(r, col) for col in CSV_COLUMNS])
    if json_path is not None:
        Path(json_path).write_text(json.dumps(report.summary(), indent=2) + "\n")
