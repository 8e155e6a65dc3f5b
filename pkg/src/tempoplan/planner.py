"""Depth-bounded forward search with chronological backtracking.

The search mirrors a logic-engine ``plan/6`` predicate: expand actions in
clause order, skip child states already on the current path, fail when the
plan reaches ``max_depth`` and backtrack.  :func:`iter_plans` keeps the
backtracking state alive so callers can ask for the next plan.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .domain import (
    DomainError,
    GroundAction,
    StaticKb,
    State,
    applicable_actions,
    apply_effects,
    check_action,
    goal_reached,
)
from .dsl import DomainFile, parse_term
from .terms import is_ground

LOGGER = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class NoPlan(Exception):
    def __init__(self, reason: str, stats: "SearchStats"):
        super().__init__(f"no plan found ({reason}): {stats.nodes_expanded} nodes expanded, "
                         f"max depth reached {stats.max_depth_reached}")
        self.reason = reason
        self.stats = stats


class PlanViolation(Exception):
    def __init__(self, step: int, check: str, detail: str = ""):
        msg = f"step {step}: {check} check failed"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.step = step
        self.check = check
        self.detail = detail


@dataclass
class SearchConfig:
    max_depth: int = 30
    goal_mode: str = "equality"
    node_budget: Optional[int] = None

    def __post_init__(self):
        if self.max_depth < 1:
            raise ConfigError("max_depth must be at least 1")
        if self.goal_mode not in ("equality", "subset"):
            raise ConfigError(f"goal_mode must be equality or subset, not {self.goal_mode!r}")
        if self.node_budget is not None and self.node_budget < 1:
            raise ConfigError("node_budget must be positive")


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    max_depth_reached: int = 0
    plans_found: int = 0


@dataclass(frozen=True)
class PlanStep:
    index: int
    action: GroundAction
    prior_state: State
    next_state: State


@dataclass(frozen=True)
class TotalOrderPlan:
    steps: tuple
    init: State
    goal: tuple
    kb: StaticKb = field(default_factory=StaticKb)

    def __len__(self) -> int:
        return len(self.steps)

    def names(self) -> list:
        return [str(s.action.ground_name) for s in self.steps]

    @property
    def final_state(self) -> State:
        return self.steps[-1].next_state if self.steps else self.init


class _Budget(Exception):
    pass


def iter_plans(init: State, goal: Sequence, kb: StaticKb, domain: DomainFile,
               cfg: Optional[SearchConfig] = None,
               stats: Optional[SearchStats] = None) -> Iterator[TotalOrderPlan]:
    """Yield plans in backtracking order.

    Raises :class:`NoPlan` once the search space (or the node budget) is
    exhausted, including after earlier plans have been yielded.
    """
    cfg = cfg or SearchConfig()
    stats = stats if stats is not None else SearchStats()
    goal = tuple(goal)
    for g in goal:
        if not is_ground(g):
            raise ConfigError(f"goal literal {g} is not ground")
    schemas = domain.schemas
    path = {init.key}
    steps: list = []

    def search(state: State) -> Iterator[TotalOrderPlan]:
        depth = len(steps)
        stats.max_depth_reached = max(stats.max_depth_reached, depth)
        if goal_reached(state, goal, cfg.goal_mode):
            stats.plans_found += 1
            yield TotalOrderPlan(tuple(steps), init, goal, kb)
            return
        if depth >= cfg.max_depth:
            return
        if cfg.node_budget is not None and stats.nodes_expanded >= cfg.node_budget:
            raise _Budget()
        stats.nodes_expanded += 1
        for action in applicable_actions(state, kb, schemas):
            try:
                child = apply_effects(state, action.effects())
            except DomainError as exc:
                LOGGER.warning("%s not applicable in %s: %s", action, state, exc)
                continue
            if child.key in path:
                continue
            path.add(child.key)
            steps.append(PlanStep(depth + 1, action, state, child))
            yield from search(child)
            steps.pop()
            path.discard(child.key)

    try:
        yield from search(init)
    except _Budget:
        raise NoPlan("budget", stats) from None
    raise NoPlan("exhausted", stats)


def plan(init: State, goal: Sequence, kb: StaticKb, domain: DomainFile,
         cfg: Optional[SearchConfig] = None,
         stats: Optional[SearchStats] = None) -> TotalOrderPlan:
    """First plan in backtracking order; raises :class:`NoPlan`."""
    return next(iter_plans(init, goal, kb, domain, cfg, stats))


def validate(p: TotalOrderPlan, domain: Optional[DomainFile] = None,
             goal_mode: str = "equality") -> bool:
    """Re-simulate ``p`` from its initial state; raise :class:`PlanViolation`.

    A step passes when its ground action is among the applicable actions of
    the re-simulated state (same schema, name and effects).
    """
    state = p.init
    for i, step in enumerate(p.steps, start=1):
        act = step.action
        schemas = domain.schemas if domain is not None else (act.schema,)
        wanted = (str(act.ground_name), tuple(map(str, act.effects())))
        ok = any((a.schema is act.schema or a.schema_index == act.schema_index) and (str(a.ground_name), tuple(map(str, a.effects()))) == wanted
                 for a in applicable_actions(state, p.kb, schemas))
        if not ok:
            failed = check_action(act, state, p.kb) or "invalid"
            raise PlanViolation(i, failed, str(act.ground_name))
        try:
            state = apply_effects(state, act.effects())
        except DomainError as exc:
            raise PlanViolation(i, "effects", str(exc)) from None
    if not goal_reached(state, p.goal, goal_mode):
        raise PlanViolation(len(p.steps), "goal", "goal not reached")
    return True


def replay(names: Sequence, init: State, goal: Sequence, kb: StaticKb,
           domain: DomainFile, schema_indices: Optional[Sequence] = None,
           strict: bool = True) -> TotalOrderPlan:
    """Rebuild a plan from ground action names.

    Each name is resolved to the first applicable ground action with that
    name (restricted to the given schema index when one is supplied).  With
    ``strict=False`` a name that is not applicable is bound against the
    first schema whose name and valid conditions match anyway, so broken
    plans can be constructed for :func:`validate`.
    """
    from .domain import satisfy_all, ground_via_kb
    from .terms import EMPTY, unify

    steps = []
    state = init
    for i, name in enumerate(names):
        term = parse_term(name) if isinstance(name, str) else name
        want_idx = None if schema_indices is None else schema_indices[i]
        chosen = None
        for a in applicable_actions(state, kb, domain.schemas):
            if a.ground_name == term and (want_idx is None or a.schema_index == want_idx):
                chosen = a
                break
        if chosen is None and not strict:
            for idx, schema in enumerate(domain.schemas):
                if want_idx is not None and idx != want_idx:
                    continue
                s = unify(schema.name, term, EMPTY)
                if s is None:
                    continue
                s = next(satisfy_all(schema.valid, state, s), s)
                s = next(ground_via_kb(schema.kb_conds, kb, s), s)
                chosen = GroundAction(schema, s, term, idx)
                break
        if chosen is None:
            raise PlanViolation(i + 1, "replay", f"{term} is not applicable")
        try:
            nxt = apply_effects(state, chosen.effects())
        except DomainError:
            if strict:
                raise
            nxt = state
        steps.append(PlanStep(i + 1, chosen, state, nxt))
        state = nxt
    return TotalOrderPlan(tuple(steps), init, tuple(goal), kb)


def plan_to_json(p: TotalOrderPlan, durations) -> list:
    from .stn import fmt_rational

    out = []
    for step in p.steps:
        base = step.action.durative_name
        lo, hi = durations.get(base) if base else (0, 0)
        out.append({
            "index": step.index,
            "action": str(step.action.ground_name),
            "schema": step.action.schema_index,
            "duration_bounds": [fmt_rational(lo), fmt_rational(hi)],
        })
    return out


def plan_from_json(data: list, init: State, goal: Sequence, kb: StaticKb,
                   domain: DomainFile) -> TotalOrderPlan:
    entries = sorted(data, key=lambda e: e["index"])
    names = [e["action"] for e in entries]
    idx = [e.get("schema") for e in entries]
    if any(i is None for i in idx):
        idx = None
    return replay(names, init, goal, kb, domain, idx)


def dumps_plan(p: TotalOrderPlan, durations) -> str:
    return json.dumps(plan_to_json(p, durations), indent=2) + "\n"
