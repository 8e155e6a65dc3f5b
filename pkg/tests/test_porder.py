from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempoplan.domain import DomainError, State, StaticKb, apply_effects, applicable_actions
from tempoplan.dsl import parse_terms
from tempoplan.planner import SearchConfig, plan, replay
from tempoplan.porder import MissingAchiever, achievers, last_achievers

from oracles import last_adder_by_replay

REFERENCE_MAP = {1: (0,), 2: (1,), 3: (2,), 4: (0,), 5: (4,), 6: (5,), 7: (6,), 8: (3, 7)}


def toggle_problem(init="f(b1)"):
    init_state = State(parse_terms(init))
    facts = [f"n({i})" for i in range(1, 10)] + [f"blk(b{i})" for i in range(1, 5)]
    kb = StaticKb(tuple(parse_terms(", ".join(facts))), ())
    return init_state, kb


def toggle_plan(domain, names, init="f(b1)"):
    state, kb = toggle_problem(init)
    return replay(names, state, (), kb, domain)


def test_reference_map(reference_plan):
    full = achievers(reference_plan)
    assert full.links == REFERENCE_MAP
    assert last_achievers(reference_plan, full).links == REFERENCE_MAP


def test_support_keeps_initial_state(reference_plan):
    full = achievers(reference_plan)
    lits = {str(k): v for k, v in full.support[2].items()}
    assert lits == {"gripping(a1,b2)": (1,), "clear(b2)": (0,)}


def test_empty_plan(toggle):
    p = toggle_plan(toggle, [])
    assert achievers(p).links == {}


def test_single_step_from_initial_state(toggle):
    p = toggle_plan(toggle, ["use(b1,1)"])
    assert achievers(p).links == {1: (0,)}


def test_later_adder_wins(toggle):
    names = ["use(b1,1)", "rm(b1)", "mk(b2)", "mk(b3)", "mk(b1)", "mk(b4)", "use(b1,2)"]
    p = toggle_plan(toggle, names)
    full = achievers(p)
    assert full.links[7] == (5,)
    assert list(full.support[7].values()) == [(0, 5)]
    assert last_achievers(p, full).links[7] == (5,)


def test_readded_literal_picks_the_re_adder(toggle):
    p = toggle_plan(toggle, ["mk(b2)", "rm(b2)", "mk(b2)", "use(b2,1)"])
    full = achievers(p)
    assert full.support[4][parse_terms("f(b2)")[0]] == (1, 3)
    assert last_achievers(p, full).links[4] == (3,)


def test_missing_achiever_detected(toggle, reference_plan, blocks, two_agents):
    names = [s.action.ground_name for s in reference_plan.steps]
    broken = replay([str(n) for n in names[:3] + names[5:]], two_agents.init, two_agents.goal, two_agents.kb,
                    blocks, strict=False)
    with pytest.raises(MissingAchiever):
        achievers(broken)


def _random_toggle_plan(domain, rng, length):
    state, kb = toggle_problem("f(b1), f(b3)")
    names = []
    for _ in range(length):
        acts = []
        for a in applicable_actions(state, kb, domain.schemas):
            try:
                acts.append((a, apply_effects(state, a.effects())))
            except DomainError:
                pass
        if not acts:
            break
        act, state = rng.choice(acts)
        names.append(str(act.ground_name))
    return toggle_plan(domain, names, "f(b1), f(b3)")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 12))
def test_last_achiever_matches_timeline(toggle, seed, length):
    p = _random_toggle_plan(toggle, random.Random(seed), length)
    full = achievers(p)
    la = last_achievers(p, full)
    expected = last_adder_by_replay(p)
    for j, per_lit in la.support.items():
        assert {k: v[0] for k, v in per_lit.items()} == expected[j]
        for i in full.links[j]:
            assert i < j


def test_every_precondition_has_an_achiever(blocks, two_agents):
    p = plan(two_agents.init, two_agents.goal, two_agents.kb, blocks, SearchConfig())
    full = achievers(p)
    for step in p.steps:
        assert set(full.support[step.index]) == set(step.action.preconditions())
        assert all(full.support[step.index].values())
