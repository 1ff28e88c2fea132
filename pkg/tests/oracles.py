"""Independent reference computations shared by the unit and acceptance tests."""

import itertools
import math

import numpy as np


def distances(kind, p, W, X, Y):
    """Row-wise weighted distances, written directly from the definitions."""
    A, B = X * W, Y * W
    if kind == "lp":
        return np.sum(np.abs(A - B) ** p, axis=1) ** (1.0 / p)
    if kind == "hamming":
        return np.sum(W * np.abs(X - Y), axis=1)
    cos = np.sum(A * B, axis=1) / (np.linalg.norm(A, axis=1) * np.linalg.norm(B, axis=1))
    return np.arccos(np.clip(cos, -1.0, 1.0))


def sample_pairs(kind, rng, n, d):
    if kind == "hamming":
        return rng.integers(0, 2, (n, d)).astype(float), rng.integers(0, 2, (n, d)).astype(float)
    if kind == "angular":
        return rng.normal(size=(n, d)), rng.normal(size=(n, d))
    return rng.integers(0, 100, (n, d)).astype(float), rng.integers(0, 100, (n, d)).astype(float)


def containment_violations(kind, p, base, target, X, Y, R, c, r_up, cr_down):
    d_t = distances(kind, p, target, X, Y)
    d_b = distances(kind, p, base, X, Y)
    eps = 1e-9
    near = d_t <= R
    far = d_t >= c * R
    bad = np.count_nonzero(near & (d_b > r_up + eps)) + np.count_nonzero(far & (d_b < cr_down - eps))
    return int(bad), int(near.sum()), int(far.sum())


def beta_mu_reference(P1, P2, n, eps=0.01, gamma=None):
    gamma = 100.0 / n if gamma is None else gamma
    gamma = min(1.0, max(1e-7, gamma))
    z = math.sqrt(math.log(2 / gamma) / math.log(1 / eps))
    raw = math.log(1 / eps) * (1 + z) ** 2 / (2 * (P1 - P2) ** 2)
    beta = math.ceil(raw)
    mu = (z * P1 + P2) / (1 + z) * beta
    return beta, mu


def brute_force_cover(universe, sets):
    """Minimum total weight over all covering subfamilies of ``sets`` [(members, weight)]."""
    universe = frozenset(universe)
    best = math.inf
    for r in range(1, len(sets) + 1):
        for combo in itertools.combinations(sets, r):
            if frozenset().union(*(m for m, _ in combo)) >= universe:
                best = min(best, sum(w for _, w in combo))
    return best


def maximal_candidates_exhaustive(ids, beta_of, tau):
    """All (base, subset) pairs that are valid and maximal, by enumerating every subset.

    ``beta_of(base, target)`` returns None when the target is unusable under base.
    A subset is valid when all members are usable and its max beta is <= tau; it is
    maximal when no usable outsider has beta <= that max.
    """
    out = set()
    for base in ids:
        usable = [t for t in ids if beta_of(base, t) is not None]
        for r in range(1, len(usable) + 1):
            for combo in itertools.combinations(usable, r):
                weight = max(beta_of(base, t) for t in combo)
                if weight > tau:
                    continue
                outsiders = [t for t in usable if t not in combo]
                if any(beta_of(base, t) <= weight for t in outsiders):
                    continue
                out.add((base, frozenset(combo), weight))
    return out
