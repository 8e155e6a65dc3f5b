"""Slow, obviously-correct reference implementations used by the tests."""
from __future__ import annotations

import itertools
from collections import deque

from tempoplan.domain import (
    apply_effects,
    blocked_by_goal,
    goal_reached,
    ground_via_kb,
    violates_any,
)
from tempoplan.terms import EMPTY, Compound, apply, is_ground, unify


def constants(state, kb):
    out = set()

    def walk(t):
        if isinstance(t, Compound):
            for a in t.args:
                walk(a)
        else:
            out.add(t)

    for t in (*state.literals, *kb.facts, *kb.goal_literals):
        walk(t)
    return sorted(out, key=str)


def applicable_bruteforce(state, kb, schemas):
    """Set of (schema index, ground name, effects) by trying every grounding.

    Valid conditions are checked as an injective assignment to state
    literals by enumerating permutations, the negative checks are read
    existentially, and KB conditions are matched in any order.
    """
    found = set()
    lits = state.literals
    for idx, schema in enumerate(schemas):
        conds = schema.valid
        for combo in itertools.permutations(range(len(lits)), len(conds)):
            s = EMPTY
            for c, i in zip(conds, combo):
                s = unify(c, lits[i], s)
                if s is None:
                    break
            if s is None:
                continue
            if violates_any(schema.invalid, state, s) or blocked_by_goal(schema.invalid_at_end, kb, s):
                continue
            for s2 in ground_via_kb(schema.kb_conds, kb, s):
                name = apply(s2, schema.name)
                if is_ground(name):
                    effects = tuple(e.substitute(s2) for e in schema.effects)
                    found.add((idx, name, effects))
    return found


def bfs_shortest(init, goal, kb, domain, limit=12, goal_mode="equality"):
    """Length of a shortest plan by breadth-first search over states."""
    from tempoplan.domain import DomainError, applicable_actions

    frontier = deque([(init, 0)])
    seen = {init.key}
    while frontier:
        state, depth = frontier.popleft()
        if goal_reached(state, goal, goal_mode):
            return depth
        if depth >= limit:
            continue
        for act in applicable_actions(state, kb, domain.schemas):
            try:
                nxt = apply_effects(state, act.effects())
            except DomainError:
                continue
            if nxt.key not in seen:
                seen.add(nxt.key)
                frontier.append((nxt, depth + 1))
    return None


def last_adder_by_replay(plan):
    """For each step j and precondition p, the step that most recently put p in the state."""
    holder = {lit: 0 for lit in plan.init.literals}
    out = {}
    for step in plan.steps:
        out[step.index] = {p: holder[p] for p in step.action.preconditions()}
        for e in step.action.effects():
            if e.kind == "add":
                holder[e.literal] = step.index
            else:
                holder.pop(e.literal, None)
    return out


def earliest_by_enumeration(n, edges, horizon):
    """Smallest integer times in [0, horizon] satisfying every edge, or None.

    Only for tiny networks; each node's earliest time is the pointwise minimum
    over all solutions, which for an STN is itself a solution.
    """
    best = None
    for times in itertools.product(range(horizon + 1), repeat=n - 1):
        t = (0,) + times
        if all(t[v] - t[u] <= w for u, v, w in edges):
            best = t if best is None else tuple(min(a, b) for a, b in zip(best, t))
    return best


def random_stn(rng, max_nodes=20, lo=-10, hi=10):
    """Random distance graph over integer weights; node 0 is the origin."""
    from tempoplan.stn import Stn

    n = rng.randint(1, max_nodes)
    stn = Stn(["a0"] + [f"x{i}" for i in range(1, n)])
    for _ in range(rng.randint(0, 3 * n)):
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            stn.add(u, v, rng.randint(lo, hi))
    return stn
