"""Prompt building, response parsing and static checks for generated test cases."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import urllib.request
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dsl import ParseError, ProblemFile, _Parser, _run
from .domain import State
from .terms import Atom, Compound, Int, Term, is_ground, signature

LOGGER = logging.getLogger(__name__)

PREAMBLE = ("Consider the following test cases.\n"
            "Each of them moves a set of boxes (b1, b2, b3, ...) from an initial state "
            "to a final state using agents(a1, a2,..).\n")

BLOCKS_ARITIES = {"available": 1, "ontable": 3, "on": 4, "clear": 1,
                  "gripping": 2, "gripped": 2, "moving": 6, "pos": 2}

AGENT, BLOCK, COORD = "agent", "block", "coordinate"
ARG_SORTS = {
    "available": (AGENT,),
    "ontable": (BLOCK, COORD, COORD),
    "on": (BLOCK, BLOCK, COORD, COORD),
    "clear": (BLOCK,),
    "gripping": (AGENT, BLOCK),
    "gripped": (AGENT, BLOCK),
    "moving": (AGENT, BLOCK, COORD, COORD, COORD, COORD),
    "pos": (COORD, COORD),
}


@dataclass(frozen=True)
class Sorts:
    agent: str = r"a\d+"
    block: str = r"b\d+"

    def accepts(self, sort: str, t: Term) -> bool:
        if sort == COORD:
            return isinstance(t, Int)
        pattern = self.agent if sort == AGENT else self.block
        return isinstance(t, Atom) and re.fullmatch(pattern, t.name) is not None


@dataclass(frozen=True)
class TestCase:
    """A ``name :- go(Init, Goal)`` clause, literals kept exactly as written."""

    name: str
    init: tuple
    goal: tuple

    __test__ = False  # not a pytest class

    def problem(self) -> ProblemFile:
        return ProblemFile((), State(self.init), tuple(self.goal))

    @classmethod
    def from_problem(cls, p: ProblemFile, name: str = "test_case") -> "TestCase":
        return cls(name, tuple(p.init.literals), tuple(p.goal))


@dataclass(frozen=True)
class PromptSpec:
    example_tests: tuple
    task_description: str = ""
    temperature: float = 0.0

    def __post_init__(self):
        if not self.example_tests:
            raise ValueError("a prompt needs at least one example test case")
        if self.temperature != 0:
            raise ValueError("temperature is fixed at 0")


# -- rendering and parsing ---------------------------------------------------

def render_literal(t: Term) -> str:
    if isinstance(t, Compound):
        return f"{t.functor}(" + ", ".join(render_literal(a) for a in t.args) + ")"
    return str(t)


def render_testcase(tc: TestCase) -> str:
    init = ", ".join(map(render_literal, tc.init))
    goal = ", ".join(map(render_literal, tc.goal))
    return f"{tc.name} :- go(\n  [{init}],\n  [{goal}]\n).\n"


def build_prompt(spec: PromptSpec) -> str:
    parts = [PREAMBLE]
    parts.extend(render_testcase(tc) for tc in spec.example_tests)
    text = "\n".join(parts)
    if spec.task_description.strip():
        text += "\n" + spec.task_description.strip() + "\n"
    return text


def _go_body(p: _Parser) -> tuple:
    p.expect("ident", "go")
    p.expect("(")
    init = p.term_list()
    p.expect(",")
    goal = p.term_list()
    p.expect(")")
    return tuple(init), tuple(goal)


def parse_go_clauses(text: str, filename: Optional[str] = None) -> list:
    """Every ``name :- go([...], [...]).`` clause of a file."""
    p = _Parser(text, filename, aliases=False)

    def go():
        out = []
        while not p.at("eof"):
            name = p.expect("ident").text
            p.expect("neck")
            p.scope = {}
            init, goal = _go_body(p)
            p.accept(".")
            out.append(TestCase(name, init, goal))
        return out

    return _run(go, text, filename)


_GO = re.compile(r"(?:\b(?P<name>[a-z][A-Za-z0-9_]*)\s*:-\s*)?(?P<go>\bgo)\s*\(")


def _clause_end(text: str, start: int) -> int:
    depth = 0
    for i in range(start, len(text)):
        c = text[i]
        if c in "([":
            depth += 1
        elif c in ")]":
            depth -= 1
            if depth == 0:
                return i + 1
    line = text.count("\n", 0, start) + 1
    raise ParseError("unterminated go(...) clause", line, start - text.rfind("\n", 0, start), "go")


@dataclass
class ParsedResponse:
    testcase: TestCase
    warnings: list = field(default_factory=list)


def parse_response(text: str) -> ParsedResponse:
    """Pull the first ``go([...],[...])`` clause out of free-form text."""
    matches = list(_GO.finditer(text))
    if not matches:
        raise ParseError("no go(...) clause in response", 0, 0, "")
    m = matches[0]
    go_at = m.start("go")
    end = _clause_end(text, go_at)
    line = text.count("\n", 0, go_at) + 1
    p = _Parser(text[go_at:end], aliases=False)
    try:
        init, goal = _run(lambda: _finish(p), text, None)
    except ParseError as exc:
        exc.line += line - 1
        raise
    warnings = []
    if len(matches) > 1:
        warnings.append(f"{len(matches)} go(...) clauses found; using the first")
        LOGGER.warning(warnings[-1])
    return ParsedResponse(TestCase(m.group("name") or "test_case", init, goal), warnings)


def _finish(p: _Parser) -> tuple:
    body = _go_body(p)
    p.expect("eof")
    return body


# -- validation ----------------------------------------------------------------

@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    location: str
    message: str
    kind: str


@dataclass
class ValidationReport:
    predicate_count: int = 0
    literal_count: int = 0
    predicate_errors: int = 0
    literal_errors: int = 0
    issues: list = field(default_factory=list)

    @property
    def stacking_coherent(self) -> bool:
        return not any(i.severity == "error" and i.kind in ("stacking", "duplicate") for i in self.issues)

    @property
    def success(self) -> bool:
        return self.predicate_errors == 0 and self.literal_errors == 0 and self.stacking_coherent

    def kinds(self) -> set:
        return {i.kind for i in self.issues}

    def add(self, severity: str, location: str, message: str, kind: str):
        self.issues.append(Issue(severity, location, message, kind))

    def to_json(self) -> dict:
        return {
            "predicate_count": self.predicate_count,
            "literal_count": self.literal_count,
            "predicate_errors": self.predicate_errors,
            "literal_errors": self.literal_errors,
            "success": self.success,
            "issues": [vars(i) for i in self.issues],
        }


def _sections(p) -> list:
    if isinstance(p, TestCase):
        return [("init", tuple(p.init)), ("goal", tuple(p.goal))]
    return [("init", tuple(p.init.literals)), ("goal", tuple(p.goal))]


def _arity(t: Term) -> int:
    return len(t.args) if isinstance(t, Compound) else 0


def _count(report: ValidationReport, sections: list):
    for _, lits in sections:
        report.predicate_count += len(lits)
        report.literal_count += sum(_arity(t) for t in lits)


def _stacking(report: ValidationReport, where: str, lits: tuple):
    supports = defaultdict(list)
    on_top = defaultdict(list)
    clear = set()
    for t in lits:
        if not isinstance(t, Compound) or not is_ground(t):
            continue
        if t.functor == "ontable" and len(t.args) == 3:
            supports[t.args[0]].append(("table", t.args[1:]))
        elif t.functor == "on" and len(t.args) == 4:
            supports[t.args[0]].append((t.args[1], t.args[2:]))
            on_top[t.args[1]].append(t.args[0])
        elif t.functor == "clear" and len(t.args) == 1:
            clear.add(t.args[0])
    blocks = set(supports) | set(on_top) | clear
    for b in sorted(blocks, key=str):
        n = len(supports.get(b, ()))
        if n == 0:
            report.add("error", where, f"{b} has no support", "stacking")
        elif n > 1:
            report.add("error", where, f"{b} has {n} supports", "stacking")
        if len(on_top.get(b, ())) > 1:
            report.add("error", where, f"{len(on_top[b])} blocks rest on {b}", "stacking")
        if b in clear and on_top.get(b):
            report.add("warning", where, f"clear({b}) while {on_top[b][0]} is on it", "clear")
        if b not in clear and not on_top.get(b) and supports.get(b):
            report.add("warning", where, f"{b} is uncovered but not marked clear", "clear")
    cells = Counter(pos for sups in supports.values() for kind, pos in sups if kind == "table")
    for pos, n in sorted(cells.items(), key=str):
        if n > 1:
            report.add("error", where, f"{n} blocks on the table at {pos[0]},{pos[1]}", "stacking")
    for b, sups in sorted(supports.items(), key=str):
        for below, pos in sups:
            if below == "table":
                continue
            under = [p for _, p in supports.get(below, ())]
            if under and pos not in under:
                report.add("error", where, f"{b} and {below} are stacked at different coordinates", "stacking")
    # cycles along the on relation
    reported = set()
    for start in sorted(supports, key=str):
        seen = []
        b = start
        while True:
            below = [s for s, _ in supports.get(b, ()) if s != "table"]
            if not below:
                break
            b = below[0]
            if b in seen or b == start:
                cyc = frozenset(seen + [start])
                if cyc not in reported:
                    reported.add(cyc)
                    names = ", ".join(sorted(map(str, cyc)))
                    report.add("error", where, f"stacking cycle among {names}", "stacking")
                break
            seen.append(b)


def _above(lits: tuple) -> set:
    """Pairs ``(x, y)``: block x sits somewhere above block y."""
    direct = {(t.args[0], t.args[1]) for t in lits
              if isinstance(t, Compound) and t.functor == "on" and len(t.args) == 4}
    closure = set(direct)
    while True:
        extra = {(x, z) for x, y in closure for y2, z in direct if y == y2} - closure
        if not extra:
            return closure
        closure |= extra


def _hamming(a: Compound, b: Compound) -> int:
    return sum(x != y for x, y in zip(a.args, b.args))


def _diff(report: ValidationReport, where: str, got: tuple, want: tuple):
    by_sig_got = defaultdict(list)
    by_sig_want = defaultdict(list)
    for t in got:
        by_sig_got[signature(t)].append(t)
    for t in want:
        by_sig_want[signature(t)].append(t)
    for sig in sorted(set(by_sig_got) | set(by_sig_want)):
        g, w = by_sig_got[sig], by_sig_want[sig]
        if g and w and sig[1] > 0:
            cost = np.array([[_hamming(x, y) for y in w] for x in g])
            rows, cols = linear_sum_assignment(cost)
            for r, c in zip(rows, cols):
                if cost[r, c]:
                    report.literal_errors += int(cost[r, c])
                    report.add("error", where, f"{g[r]} differs from expected {w[c]}", "literal")
            matched = len(rows)
        else:
            matched = min(len(g), len(w))
        extra = len(g) - matched
        if extra > 0:
            report.predicate_errors += extra
            report.add("error", where, f"{extra} unexpected {sig[0]}/{sig[1]} literal(s)", "predicate")
        elif extra < 0:
            report.predicate_errors += -extra
            report.add("error", where, f"{-extra} missing {sig[0]}/{sig[1]} literal(s)", "predicate")
    ref_above = _above(want)
    for x, y in sorted(_above(got), key=str):
        if (y, x) in ref_above:
            report.add("error", where, f"{x} is above {y} but belongs below it", "wrong-stack-order")


def validate_testcase(p, arities: Optional[dict] = None, reference=None,
                      sorts: Optional[Sorts] = None) -> ValidationReport:
    """Static checks on a generated test case (a ``TestCase`` or ``ProblemFile``).

    Init and goal are checked independently.  With ``reference`` the literals
    are also compared position by position against the expected test case.
    """
    arities = BLOCKS_ARITIES if arities is None else arities
    sorts = sorts or Sorts()
    report = ValidationReport()
    sections = _sections(p)
    _count(report, sections)
    for where, lits in sections:
        for dup, n in Counter(lits).items():
            if n > 1:
                report.add("error", where, f"{dup} listed {n} times", "duplicate")
        for t in lits:
            if not isinstance(t, (Compound, Atom)):
                report.predicate_errors += 1
                report.add("error", where, f"{t} is not a predicate", "predicate")
                continue
            name, ar = signature(t)
            if name not in arities:
                report.predicate_errors += 1
                report.add("error", where, f"unknown predicate {name}/{ar}", "predicate")
                continue
            if arities[name] != ar:
                report.predicate_errors += 1
                report.add("error", where, f"{t}: {name} takes {arities[name]} arguments, not {ar}", "predicate")
                continue
            for pos, (sort, arg) in enumerate(zip(ARG_SORTS.get(name, ()), t.args), start=1):
                if not sorts.accepts(sort, arg):
                    report.literal_errors += 1
                    report.add("error", where, f"{t}: argument {pos} should be a {sort}", "literal")
        _stacking(report, where, lits)
    if reference is not None:
        for (where, got), (_, want) in zip(sections, _sections(reference)):
            _diff(report, where, got, want)
    return report


def score_against_reference(p, ref) -> ValidationReport:
    """Counts for ``p`` and its mismatches against ``ref``."""
    report = ValidationReport()
    sections = _sections(p)
    _count(report, sections)
    for (where, got), (_, want) in zip(sections, _sections(ref)):
        _diff(report, where, got, want)
    return report


# -- transports ----------------------------------------------------------------

def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class TransportError(RuntimeError):
    pass


class ReplayTransport:
    """Offline answers stored as ``<dir>/<sha256 of prompt>.txt``."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def path_for(self, prompt: str) -> Path:
        return self.directory / f"{prompt_hash(prompt)}.txt"

    def complete(self, prompt: str) -> str:
        path = self.path_for(prompt)
        if not path.exists():
            raise TransportError(f"no recorded response for this prompt ({path.name})")
        return path.read_text(encoding="utf-8")

    def record(self, prompt: str, response: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.path_for(prompt)
        path.write_text(response, encoding="utf-8")
        return path


@dataclass
class LiveTransport:
    """POST ``{model, temperature: 0, prompt}`` as JSON to an HTTP endpoint."""

    endpoint: str
    model: str = ""
    api_key_env: str = "TEMPOPLAN_LLM_KEY"
    prompt_field: str = "prompt"
    response_field: str = "text"
    timeout: float = 60.0

    def complete(self, prompt: str) -> str:
        body = json.dumps({"model": self.model, "temperature": 0, self.prompt_field: prompt}).encode()
        req = urllib.request.Request(self.endpoint, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        key = os.environ.get(self.api_key_env)
        if key:
            req.add_header("Authorization", f"Bearer {key}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                data = json.loads(resp.read().decode("utf-8"))
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        try:
            return data[self.response_field]
        except (KeyError, TypeError):
            raise TransportError(f"response has no {self.response_field!r} field") from None
