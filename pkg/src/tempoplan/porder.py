"""Causal support between the steps of a total-order plan.

Step ``i`` achieves step ``j`` when an add-effect of ``i`` is one of the
ground valid conditions of ``j``.  The virtual step 0 adds the initial
state.  Because step 0 precedes every step anyway, it is listed in the step
map only for steps that have no other achiever; the per-literal view keeps
it.
"""
from __future__ import annotations

from dataclasses import dataclass

from .planner import TotalOrderPlan


class MissingAchiever(Exception):
    pass


@dataclass(frozen=True)
class AchieverMap:
    """``links[j]``: achiever indices of step ``j`` (ascending).

    ``support[j]`` maps each precondition literal of step ``j`` to the
    indices (0 included) that add it.
    """

    links: dict
    support: dict

    def __getitem__(self, j: int) -> tuple:
        return self.links[j]

    def __len__(self) -> int:
        return len(self.links)

    def edges(self) -> list:
        return [(i, j) for j in sorted(self.links) for i in self.links[j]]


def _links_from_support(support: dict) -> dict:
    links = {}
    for j, per_lit in support.items():
        ids = set()
        for idxs in per_lit.values():
            ids.update(idxs)
        if len(ids) > 1:
            ids.discard(0)
        links[j] = tuple(sorted(ids))
    return links


def achievers(plan: TotalOrderPlan) -> AchieverMap:
    adds = {0: set(plan.init.literals)}
    for step in plan.steps:
        adds[step.index] = set(step.action.adds())
    support = {}
    for step in plan.steps:
        j = step.index
        per_lit = {}
        for pre in step.action.preconditions():
            idxs = tuple(i for i in range(j) if pre in adds[i])
            if not idxs:
                raise MissingAchiever(f"step {j} ({step.action}): nothing adds {pre}")
            per_lit[pre] = idxs
        support[j] = per_lit
    return AchieverMap(_links_from_support(support), support)


def last_achievers(plan: TotalOrderPlan, full: AchieverMap) -> AchieverMap:
    """Keep, per precondition, the latest achiever with no deleter in between."""
    deletes = {s.index: set(s.action.deletes()) for s in plan.steps}
    support = {}
    for j, per_lit in full.support.items():
        chosen = {}
        for pre, idxs in per_lit.items():
            best = None
            for i in sorted(idxs, reverse=True):
                if not any(pre in deletes[k] for k in range(i + 1, j)):
                    best = i
                    break
            if best is None:
                raise MissingAchiever(f"step {j}: every achiever of {pre} is undone before it")
            chosen[pre] = (best,)
        support[j] = chosen
    return AchieverMap(_links_from_support(support), support)
