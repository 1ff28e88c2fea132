"""(c, k)-approximate nearest neighbour queries under one weight vector.

The query is hashed once per table of its group. Rounds then widen the search
radius and the bucket level together by a factor ``c``; every table probe
counts collisions for the newly exposed points and promotes those reaching the
collision threshold into the candidate set, whose true weighted distances are
computed on promotion. Search stops once ``k`` candidates lie within ``c * R``
or once ``k + gamma * n`` candidates have been checked.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .index import BucketCursor, IoCounter, PointFetcher, WlshIndex
from .metric import Dataset, Metric, Point, weighted_distances
from .params import radius_profile_for_range

log = logging.getLogger(__name__)


@dataclass
class QueryResult:
    neighbors: list[tuple[int, float]]
    radius_final: float
    candidates_checked: int
    io: IoCounter = field(default_factory=IoCounter)
    rounds: int = 0
    stop: str = ""


class CollisionState:
    """Collision counts of one query and its frequent (candidate) set.

    Counts live in a dense array over point ids, reset per query. Callers must
    pass each (point, table) pair at most once, which incremental bucket
    widening guarantees.
    """

    def __init__(self, n: int, threshold: float):
        self.threshold = threshold
        self.counts = np.zeros(n, dtype=np.int32)
        self.in_frequent = np.zeros(n, dtype=bool)
        self.frequent: list[int] = []

    def count(self, members: np.ndarray) -> np.ndarray:
        """Add one collision for each of ``members``; return newly frequent ids."""
        if members.size == 0:
            return members
        self.counts[members] += 1
        hit = members[self.counts[members] >= self.threshold]
        new = np.sort(hit[~self.in_frequent[hit]])
        if new.size:
            self.in_frequent[new] = True
            self.frequent.extend(new.tolist())
        return new


def count_collisions(state: CollisionState, table_id: int, members: np.ndarray) -> CollisionState:
    state.count(np.asarray(members, dtype=np.int64))
    return state


def query_buckets(index: WlshIndex, group: int, beta: int, q: np.ndarray) -> list[int]:
    return [t.function.hash(q) for t in index.tables[group][:beta]]


def search(index: WlshIndex, dataset: Dataset, q, w_id: int, k: int) -> QueryResult:
    """Approximate k nearest neighbours of ``q`` under weight vector ``w_id``.

    Neighbours are reported ascending by (distance, id) using the query's own
    weights. Fewer than ``k`` are returned only if the radius grid runs out
    before ``k`` candidates turn frequent.
    """
    if not 1 <= k <= index.n:
        raise ConfigError(f"k must satisfy 1 <= k <= n={index.n}, got {k}")
    if dataset.n != index.n or dataset.d != index.d:
        raise ConfigError("dataset shape does not match the index")
    s = index.settings
    gi = index.group_index(w_id)
    group = index.plan.groups[gi]
    vp = group.params_for(w_id)
    wv = index.weight_vector(w_id)
    metric = Metric.lp(s.p)
    q = np.asarray(q.coords if isinstance(q, Point) else q, dtype=np.float64)
    if q.shape != (index.d,):
        raise ConfigError(f"query has shape {q.shape}, expected ({index.d},)")

    beta = vp.beta
    threshold = vp.mu_reduced if s.reduction else vp.mu
    profile = radius_profile_for_range(index.value_range, wv, s.p, s.c)
    limit = k + s.gamma * index.n

    counter = IoCounter()
    fetcher = PointFetcher(dataset, counter)
    state = CollisionState(index.n, threshold)
    tables = index.tables[gi][:beta]
    cursors = [BucketCursor(t, t.function.hash(q)) for t in tables]

    cand_ids: list[int] = []
    cand_dist: list[float] = []
    R = profile.r_min
    level = 1
    within = 0
    stop = "radius-exhausted"
    rounds = 0
    for rounds in range(1, profile.levels + 2):
        bound = s.c * R
        within = sum(1 for dist in cand_dist if dist <= bound)
        done = False
        for cur in cursors:
            new = state.count(cur.widen(level, counter))
            if new.size:
                for pid in new.tolist():
                    fetcher.fetch(pid)
                dists = weighted_distances(metric, wv, dataset.coords[new], q)
                cand_ids.extend(new.tolist())
                cand_dist.extend(dists.tolist())
                within += int(np.count_nonzero(dists <= bound))
            if within >= k:
                stop = "k-within-cR"
                done = True
                break
            if len(cand_ids) >= limit:
                stop = "candidate-limit"
                done = True
                break
        if done or rounds == profile.levels + 1:
            break
        R *= s.c
        level *= s.c

    order = sorted(range(len(cand_ids)), key=lambda i: (cand_dist[i], cand_ids[i]))[:k]
    neighbors = [(cand_ids[i], cand_dist[i]) for i in order]
    return QueryResult(neighbors, R, len(cand_ids), counter, rounds, stop)
