"""Partition a weight-vector set into groups that share one family of tables.

Each base vector proposes nested candidate groups: the targets it can serve,
taken in ascending order of their table count under that base. A greedy
weighted set cover picks candidates, and overlapping picks are resolved by
keeping every vector in the group where it needs the fewest tables.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InfeasiblePlanError
from .params import GroupParams, SolverContext

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateSet:
    base: int
    members: frozenset[int]
    weight: int


@dataclass
class PartitionPlan:
    groups: list[GroupParams]
    assignment: dict[int, int]
    tau: int
    context: SolverContext | None = field(default=None, repr=False, compare=False)

    @property
    def beta_total(self) -> int:
        return sum(g.beta_group for g in self.groups)

    def group_of(self, wid: int) -> GroupParams:
        return self.groups[self.assignment[wid]]

    def validate(self, universe: Iterable[int]) -> None:
        """Raise AssertionError unless groups are disjoint, cover ``universe``
        and respect the table cap."""
        seen: set[int] = set()
        for gi, g in enumerate(self.groups):
            ids = set(g.member_ids)
            assert ids, f"group {gi} is empty"
            assert not (ids & seen), f"group {gi} overlaps an earlier group"
            assert g.beta_group <= self.tau, f"group {gi} needs {g.beta_group} > tau tables"
            assert g.beta_group == max(vp.beta for _, vp in g.members)
            for m in ids:
                assert self.assignment[m] == gi
            seen |= ids
        assert seen == set(universe), "groups do not cover the weight-vector set"


def candidate_sets(ctx: SolverContext, tau: int) -> list[CandidateSet]:
    """Maximal candidate groups per base whose table count is at most ``tau``.

    Raises InfeasiblePlanError naming a vector that no candidate can hold.
    """
    out: list[CandidateSet] = []
    ids = [wv.id for wv in ctx.weights]
    for base in ids:
        scored = []
        for target in ids:
            vp = ctx.pair(base, target)
            if vp is not None:
                scored.append((vp.beta, target))
        scored.sort()
        for j, (beta, _) in enumerate(scored):
            if beta > tau:
                break
            # a prefix followed by an equal beta is not maximal
            if j + 1 < len(scored) and scored[j + 1][0] == beta:
                continue
            out.append(CandidateSet(base, frozenset(t for _, t in scored[: j + 1]), beta))
    covered = set().union(*(cs.members for cs in out)) if out else set()
    missing = [i for i in ids if i not in covered]
    if missing:
        wid = missing[0]
        raise InfeasiblePlanError(
            f"tau={tau} is below the table count of weight vector {wid} "
            f"(self beta {ctx.self_beta(wid)}); tau_min={ctx.tau_min()}"
        )
    return out


def greedy_weighted_set_cover(universe: Iterable[int],
                              candidates: Sequence[CandidateSet]) -> list[CandidateSet]:
    """Chvatal's greedy: repeatedly take the cheapest candidate per newly covered element."""
    uncovered = set(universe)
    coverable = set().union(*(cs.members for cs in candidates)) if candidates else set()
    if not uncovered <= coverable:
        raise InfeasiblePlanError(f"elements {sorted(uncovered - coverable)[:5]} cannot be covered")
    chosen: list[CandidateSet] = []
    while uncovered:
        _, _, _, idx = min(
            (Fraction(cs.weight, gain), cs.weight, cs.base, idx)
            for idx, cs in enumerate(candidates)
            if (gain := len(cs.members & uncovered))
        )
        chosen.append(candidates[idx])
        uncovered -= candidates[idx].members
    return chosen


def finalize_partition(cover: Sequence[CandidateSet], ctx: SolverContext, tau: int) -> PartitionPlan:
    """Make the cover disjoint: each vector stays where its own table count is lowest."""
    members: list[list[int]] = [[] for _ in cover]
    for wv in ctx.weights:
        best = None
        for gi, cs in enumerate(cover):
            if wv.id in cs.members:
                beta = ctx.pair(cs.base, wv.id).beta
                if best is None or beta < best[0]:
                    best = (beta, gi)
        if best is None:
            raise InfeasiblePlanError(f"weight vector {wv.id} is not covered")
        members[best[1]].append(wv.id)
    groups: list[GroupParams] = []
    assignment: dict[int, int] = {}
    for cs, ms in zip(cover, members):
        if not ms:
            continue
        for m in ms:
            assignment[m] = len(groups)
        groups.append(ctx.group_params(cs.base, ms))
    return PartitionPlan(groups, assignment, tau, ctx)


def partition(ctx: SolverContext, tau: int) -> PartitionPlan:
    cands = candidate_sets(ctx, tau)
    cover = greedy_weighted_set_cover([wv.id for wv in ctx.weights], cands)
    plan = finalize_partition(cover, ctx, tau)
    log.info("partitioned %d vectors into %d groups, %d tables (naive %d)",
             len(ctx.weights), len(plan.groups), plan.beta_total, ctx.naive_total())
    return plan


def naive_plan(ctx: SolverContext, tau: int | None = None) -> PartitionPlan:
    """One group per vector, each with its own tables."""
    groups = [ctx.group_params(wv.id, [wv.id]) for wv in ctx.weights]
    assignment = {wv.id: i for i, wv in enumerate(ctx.weights)}
    if tau is None:
        tau = max(g.beta_group for g in groups)
    return PartitionPlan(groups, assignment, tau, ctx)
