from __future__ import annotations

from importlib.resources import files

import pytest

from tempoplan.dsl import parse_domain, parse_problem
from tempoplan.llm import parse_go_clauses
from tempoplan.planner import replay

REFERENCE_NAMES = [
    "grip_start(a1,b2)",
    "grip_end(a1,b2)",
    "move_block_start(a1,b2,2,2,3,3)",
    "grip_start(a2,b1)",
    "grip_end(a2,b1)",
    "move_block_start(a2,b1,1,1,3,3)",
    "move_block_end(a2,b1,1,1,3,3)",
    "move_block_end(a1,b2,2,2,3,3)",
]

TOGGLE_DOMAIN = """
action mk(X) { valid: [] invalid: [] goal_block: [] kb: [blk(X)] effects: [add(f(X))] }
action rm(X) { valid: [f(X)] invalid: [] goal_block: [] kb: [] effects: [del(f(X))] }
action use(X, N) { valid: [f(X)] invalid: [] goal_block: [] kb: [n(N)] effects: [add(u(N))] }
"""


def data_text(name: str) -> str:
    return files("tempoplan.data").joinpath(name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def blocks():
    return parse_domain(data_text("blocks_world.domain"), filename="blocks_world.domain")


@pytest.fixture(scope="session")
def two_agents():
    return parse_problem(data_text("two_agents.problem"), filename="two_agents.problem")


@pytest.fixture(scope="session")
def reference_plan(blocks, two_agents):
    return replay(REFERENCE_NAMES, two_agents.init, two_agents.goal, two_agents.kb, blocks)


@pytest.fixture(scope="session")
def llm_examples():
    return parse_go_clauses(data_text("llm_examples.problems"))


@pytest.fixture(scope="session")
def toggle():
    return parse_domain(TOGGLE_DOMAIN, check_pairing=False)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
