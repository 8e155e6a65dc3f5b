from __future__ import annotations

import random

import pytest

from tempoplan.domain import (
    AddDuplicate, DelMissing, DomainError, DurationTable, Effect, State, StaticKb,
    applicable_actions, apply_effects, check_action, goal_reached, satisfy_all, snap_base,
    states_equal,
)
from tempoplan.dsl import parse_term, parse_terms
from tempoplan.terms import compound

from oracles import applicable_bruteforce


def st(text):
    return State(parse_terms(text))


def test_state_set_semantics():
    a = st("p(a), q(b)")
    b = st("q(b), p(a)")
    assert a == b and hash(a) == hash(b)
    assert states_equal(a, b)
    assert a.literals != b.literals


def test_state_rejects_bad_literals():
    with pytest.raises(ValueError):
        State(parse_terms("p(a), p(a)"))
    with pytest.raises(ValueError):
        State(parse_terms("p(X)"))


def test_effects_add_and_delete():
    s = apply_effects(st("p(a)"), [Effect("del", parse_term("p(a)")), Effect("add", parse_term("q(a)"))])
    assert s.literals == (parse_term("q(a)"),)


def test_effect_errors():
    with pytest.raises(DelMissing):
        apply_effects(st("p(a)"), [Effect("del", parse_term("p(b)"))])
    with pytest.raises(AddDuplicate):
        apply_effects(st("p(a)"), [Effect("add", parse_term("p(a)"))])
    with pytest.raises(DomainError):
        apply_effects(st("p(a)"), [Effect("add", parse_term("p(X)"))])
    with pytest.raises(ValueError):
        Effect("toggle", parse_term("p(a)"))


def test_nonground_delete_removes_first_match(caplog):
    s = apply_effects(st("p(a), p(b)"), [Effect("del", parse_term("p(_)"))])
    assert s.literals == (parse_term("p(b)"),)
    assert "non-ground" in caplog.text


def test_satisfy_all_uses_distinct_literals():
    conds = parse_terms("p(X), p(Y)")
    assert list(satisfy_all(conds, st("p(a)"))) == []
    sols = list(satisfy_all(conds, st("p(a), p(b)")))
    assert len(sols) == 2


def test_goal_modes():
    s = st("p(a), q(b)")
    goal = parse_terms("p(a)")
    assert not goal_reached(s, goal)
    assert goal_reached(s, goal, "subset")
    with pytest.raises(ValueError):
        goal_reached(s, goal, "fuzzy")


def test_duration_table():
    d = DurationTable({"grip": (1, 2)})
    assert d["grip"] == (1, 2) and d.get("move") == (1, 10)
    assert d.with_bounds(move=(3, 2)).inverted() == ["move"]
    assert snap_base("grip_start") == "grip" and snap_base("grip") is None and snap_base("_end") is None


def test_two_agents_initial_actions(blocks, two_agents):
    names = [str(a) for a in applicable_actions(two_agents.init, two_agents.kb, blocks.schemas)]
    # the block is bound first (ontable is the first valid condition)
    assert names == ["grip_start(a1,b1)", "grip_start(a2,b1)", "grip_start(a1,b2)", "grip_start(a2,b2)"]


def test_goal_block_prunes_goal_literals(blocks):
    s = st("available(a1), ontable(b1,1,1), clear(b1)")
    kb = StaticKb((), parse_terms("ontable(b1,1,1), clear(b1), available(a1)"))
    assert list(applicable_actions(s, kb, blocks.schemas)) == []


def test_check_action_reports_first_failing_check(blocks, reference_plan, two_agents):
    act = reference_plan.steps[1].action  # grip_end needs gripping(a1,b2)
    assert check_action(act, two_agents.init, two_agents.kb) == "valid"
    first = reference_plan.steps[0].action
    assert check_action(first, two_agents.init, two_agents.kb) is None
    blocked = StaticKb((), (parse_term("ontable(b2,2,2)"),))
    assert check_action(first, two_agents.init, blocked) == "goal_block"
    busy = State(two_agents.init.literals + (compound("gripping", "a2", "b2"),))
    assert check_action(first, busy, two_agents.kb) == "invalid"


def _walk_states(init, kb, domain, steps, rng):
    out = [init]
    state = init
    for _ in range(steps):
        acts = list(applicable_actions(state, kb, domain.schemas))
        if not acts:
            break
        state = apply_effects(state, rng.choice(acts).effects())
        out.append(state)
    return out


@pytest.mark.parametrize("seed", range(8))
def test_applicable_matches_bruteforce(blocks, two_agents, llm_examples, seed):
    rng = random.Random(seed)
    cases = [(two_agents.init, two_agents.kb)]
    for tc in llm_examples:
        cases.append((State(tc.init), StaticKb(parse_terms("pos(4,4), pos(5,5)"), tc.goal)))
    for init, kb in cases:
        for state in _walk_states(init, kb, blocks, 6, rng):
            fast = {(a.schema_index, a.ground_name, a.effects()) for a in applicable_actions(state, kb, blocks.schemas)}
            assert fast == applicable_bruteforce(state, kb, blocks.schemas)


def test_applicable_order_is_deterministic(blocks, two_agents):
    a = [str(x) for x in applicable_actions(two_agents.init, two_agents.kb, blocks.schemas)]
    b = [str(x) for x in applicable_actions(two_agents.init, two_agents.kb, blocks.schemas)]
    assert a == b
