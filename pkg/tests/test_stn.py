from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempoplan.domain import DurationTable
from tempoplan.planner import replay
from tempoplan.porder import achievers, last_achievers
from tempoplan.stn import (
    DELETER, LOWER, ORDER, UPPER, Inconsistent, NegativeCycle, Stn, UnmatchedSnap, build_stn,
    check_consistency, closure, distances_to_origin, earliest_schedule, minimize_makespan,
    stn_from_json, stn_to_dot, stn_to_json,
)

from conftest import REFERENCE_NAMES
from oracles import earliest_by_enumeration, random_stn

UNIT = DurationTable({"grip": (1, 1), "move_block": (1, 1)})


def reference_stn(plan, durations=UNIT):
    return build_stn(plan, last_achievers(plan, achievers(plan)), durations)


def satisfied(stn, times):
    return all(times[e.dst] - times[e.src] <= e.weight for e in stn.edges)


def test_reference_network_shape(reference_plan):
    stn = reference_stn(reference_plan)
    assert stn.n == 9
    order = sorted((e.dst, e.src) for e in stn.edges if e.kind == ORDER)
    assert order == [(0, 1), (0, 4), (1, 2), (2, 3), (3, 8), (4, 5), (5, 6), (6, 7), (7, 8)]
    assert not [e for e in stn.edges if e.kind == DELETER]
    assert stn.pairs == [(1, 2, "grip"), (3, 8, "move_block"), (4, 5, "grip"), (6, 7, "move_block")]
    assert sum(e.kind == UPPER for e in stn.edges) == 4 and sum(e.kind == LOWER for e in stn.edges) == 4


def test_reference_unit_schedule(reference_plan):
    stn = reference_stn(reference_plan)
    assert check_consistency(stn)
    sched = earliest_schedule(stn)
    assert [sched[i] for i in range(9)] == [0, 0, 1, 1, 0, 1, 1, 2, 2]
    assert sched.makespan == 2
    edges = [(e.src, e.dst, int(e.weight)) for e in stn.edges]
    assert earliest_by_enumeration(9, edges, 2) == (0, 0, 1, 1, 0, 1, 1, 2, 2)


def test_minimize_matches_earliest_and_exposes_closure(reference_plan, blocks):
    stn = reference_stn(reference_plan, blocks.durations)
    a, b = earliest_schedule(stn), minimize_makespan(stn)
    assert a.makespan == b.makespan == 4
    assert b.closure is not None and all(-b.closure[x][0] == b[x] for x in range(stn.n))
    assert satisfied(stn, b.times)


def test_closure_never_loosens(reference_plan, blocks):
    stn = reference_stn(reference_plan, blocks.durations)
    d = closure(stn)
    for e in stn.edges:
        assert d[e.src][e.dst] <= e.weight


def test_empty_plan(blocks, two_agents):
    p = replay([], two_agents.init, two_agents.goal, two_agents.kb, blocks)
    stn = reference_stn(p)
    assert stn.labels == ["a0"] and stn.edges == []
    assert earliest_schedule(stn).makespan == 0


def test_unmatched_start(blocks, two_agents):
    p = replay(REFERENCE_NAMES[:1], two_agents.init, two_agents.goal, two_agents.kb, blocks)
    with pytest.raises(UnmatchedSnap):
        reference_stn(p)


def test_inverted_bounds_give_witness(reference_plan):
    stn = reference_stn(reference_plan, DurationTable({"grip": (5, 2), "move_block": (1, 1)}))
    verdict = check_consistency(stn)
    assert isinstance(verdict, NegativeCycle) and not verdict
    assert verdict.weight < 0
    kinds = {e.kind for e in verdict.witness}
    assert kinds == {UPPER, LOWER}
    ws = sorted(e.weight for e in verdict.witness)
    assert ws == [-5, 2]
    with pytest.raises(Inconsistent):
        earliest_schedule(stn)


def test_ordering_cycle_with_positive_lower_bound():
    stn = Stn(["a0", "a", "b"])
    stn.add(1, 0, 0)
    stn.add(2, 1, 0)   # b after a
    stn.add(1, 2, 0)   # a after b
    stn.add(2, 1, -1)  # b at least 1 after a
    verdict = check_consistency(stn)
    assert not verdict
    assert sum(e.weight for e in verdict.witness) < 0


def test_single_action_earliest_is_lower_bound():
    stn = Stn(["a0", "act_start(x)", "act_end(x)"])
    stn.add(1, 0, 0)
    stn.add(2, 1, 0)
    stn.add(1, 2, 7, UPPER)
    stn.add(2, 1, -3, LOWER)
    stn.pairs.append((1, 2, "act"))
    s = earliest_schedule(stn)
    assert (s[1], s[2], s.makespan) == (0, 3, 3)


def test_rational_bounds_stay_exact(reference_plan):
    stn = reference_stn(reference_plan, DurationTable({"grip": (Fraction(1, 3), Fraction(1, 2)),
                                                 "move_block": (Fraction(5, 7), 1)}))
    s = minimize_makespan(stn)
    assert s.makespan == Fraction(1, 3) + Fraction(5, 7)
    assert all(isinstance(t, Fraction) for t in s.times.values())


def test_deleter_edge_protects_consumer(toggle):
    from tempoplan.domain import State, StaticKb
    from tempoplan.dsl import parse_terms

    kb = StaticKb(tuple(parse_terms("n(1), blk(b1)")), ())
    p = replay(["use(b1,1)", "rm(b1)"], State(parse_terms("f(b1)")), (), kb, toggle)
    la = last_achievers(p, achievers(p))
    assert la.links == {1: (0,), 2: (0,)}
    stn = build_stn(p, la, DurationTable())
    assert [(e.src, e.dst, e.kind) for e in stn.edges if e.kind == DELETER] == [(2, 1, DELETER)]
    bare = build_stn(p, la, DurationTable(), deleter_edges=False)
    assert not [e for e in bare.edges if e.kind == DELETER]


def test_json_round_trip_and_dot(reference_plan, blocks):
    stn = reference_stn(reference_plan, blocks.durations)
    data = stn_to_json(stn)
    assert set(data) >= {"nodes", "edges"} and set(data["edges"][0]) >= {"from", "to", "weight"}
    again = stn_from_json(data)
    assert again.edges == stn.edges and again.labels == stn.labels and again.pairs == stn.pairs
    dot = stn_to_dot(stn)
    assert dot.count("style=dashed") == 4
    assert 'label="a8: move_block_end(a1,b2,2,2,3,3)"' in dot


def _fw_verdict(stn):
    try:
        d = closure(stn)
    except Inconsistent:
        return False, None
    return True, [None if row[0] is None else row[0] for row in d]


@pytest.mark.parametrize("seed", range(40))
def test_relaxation_agrees_with_closure(seed):
    stn = random_stn(random.Random(seed))
    ok, to_origin = _fw_verdict(stn)
    assert bool(check_consistency(stn)) == ok
    if ok:
        assert distances_to_origin(stn) == to_origin


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(0, 4), st.integers(1, 5), st.integers(0, 5),
       st.integers(0, 3), st.integers(0, 3))
def test_widening_keeps_consistency(reference_plan, gl, gw, ml, mw, dl, du):
    tight = DurationTable({"grip": (gl, gl + gw), "move_block": (ml, ml + mw)})
    wide = DurationTable({"grip": (max(0, gl - dl), gl + gw + du), "move_block": (max(0, ml - dl), ml + mw + du)})
    a, b = reference_stn(reference_plan, tight), reference_stn(reference_plan, wide)
    assert check_consistency(a)
    assert check_consistency(b)
    s = earliest_schedule(a)
    assert satisfied(a, s.times)
    for start, end, base in a.pairs:
        lo, hi = tight[base]
        assert lo <= s[end] - s[start] <= hi
