"""Readers and printers for domain files, problem files and single terms.

Domain files hold action schemas and a ``durations`` block::

    action grip_start(A, B) {
      valid: [ontable(B, X, Y), available(A), clear(B)]
      invalid: [gripped(_, B), gripping(_, B)]
      goal_block: [ontable(B, X, Y)]
      kb: []
      effects: [del(available(A)), add(gripping(A, B))]
    }
    durations { grip: [1, 2] }

The positional clause form ``action(Name, [...], [...], [...], [...], [...]).``
is read as well.  Problem files hold ``kb``, ``init`` and ``goal`` blocks.
``%`` starts a comment that runs to the end of the line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .domain import ActionSchema, DurationTable, Effect, StaticKb, State, snap_base
from .terms import Atom, Compound, Int, Term, Var, fresh_id, is_ground

ALIASES = {("ont", 3): "ontable", ("av", 1): "available", ("clr", 1): "clear"}
MAX_NESTING = 100
SECTIONS = ("valid", "invalid", "goal_block", "kb", "effects")


class DslError(Exception):
    def __init__(self, message: str, line: int = 0, column: int = 0,
                 token: str = "", filename: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.token = token
        self.filename = filename

    def __str__(self) -> str:
        where = self.filename or "<input>"
        return f"{where}:{self.line}:{self.column}: {self.message}"


class ParseError(DslError):
    pass


class PairingError(DslError):
    pass


class DurationError(DslError):
    pass


class GroundnessError(DslError):
    pass


@dataclass(frozen=True)
class DomainFile:
    schemas: tuple = ()
    durations: DurationTable = field(default_factory=DurationTable)


@dataclass(frozen=True)
class ProblemFile:
    kb_facts: tuple = ()
    init: State = field(default_factory=State)
    goal: tuple = ()

    @property
    def kb(self) -> StaticKb:
        return StaticKb(self.kb_facts, self.goal)


# -- lexer -------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|%[^\n]*)
  | (?P<num>-?\d+(?:\.\d+)?)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<neck>:-)
  | (?P<punct>[()\[\]{},:.])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, filename: Optional[str] = None) -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line,
                             pos - line_start + 1, text[pos], filename)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind if kind != "punct" else chunk, chunk,
                                line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, filename: Optional[str] = None,
                 aliases: bool = True):
        self.filename = filename
        self.toks = tokenize(text, filename)
        self.i = 0
        self.aliases = aliases
        self.scope: dict = {}

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, message: str, tok: Optional[Token] = None, cls=ParseError):
        tok = tok or self.tok
        return cls(message, tok.line, tok.col, tok.text, self.filename)

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        if not self.at(kind, text):
            want = text or kind
            got = self.tok.text or "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        t = self.tok
        self.i += 1
        return t

    def accept(self, kind: str, text: Optional[str] = None) -> bool:
        if self.at(kind, text):
            self.i += 1
            return True
        return False

    def term(self, depth: int = 0) -> Term:
        if depth > MAX_NESTING:
            raise self.error("term nested too deeply")
        t = self.tok
        if t.kind == "num":
            if "." in t.text:
                raise self.error("only integers may appear inside terms")
            self.i += 1
            return Int(int(t.text))
        if t.kind == "var":
            self.i += 1
            if t.text == "_":
                return Var("_", fresh_id())
            if t.text not in self.scope:
                self.scope[t.text] = Var(t.text, fresh_id())
            return self.scope[t.text]
        if t.kind == "ident":
            self.i += 1
            if not self.at("("):
                return Atom(t.text)
            self.i += 1
            args = [self.term(depth + 1)]
            while self.accept(","):
                args.append(self.term(depth + 1))
            self.expect(")")
            functor = t.text
            if self.aliases:
                functor = ALIASES.get((functor, len(args)), functor)
            return Compound(functor, tuple(args))
        raise self.error(f"expected a term, found {t.text or 'end of input'!r}")

    def term_list(self) -> list:
        self.expect("[")
        out = []
        if self.accept("]"):
            return out
        out.append(self.term())
        while self.accept(","):
            out.append(self.term())
        self.expect("]")
        return out

    def effect(self) -> Effect:
        t = self.tok
        if t.kind != "ident" or t.text not in ("add", "del"):
            raise self.error(f"expected add(...) or del(...), found {t.text!r}")
        self.i += 1
        self.expect("(")
        lit = self.term()
        self.expect(")")
        return Effect(t.text, lit)

    def effect_list(self) -> list:
        self.expect("[")
        out = []
        if self.accept("]"):
            return out
        out.append(self.effect())
        while self.accept(","):
            out.append(self.effect())
        self.expect("]")
        return out

    def number(self) -> Fraction:
        t = self.expect("num")
        return Fraction(t.text)

    # -- domain --

    def schema_name(self) -> Compound:
        tok = self.tok
        name = self.term()
        if not isinstance(name, Compound):
            raise self.error("action name must be a compound term", tok)
        return name

    def action_block(self, line: int) -> ActionSchema:
        name = self.schema_name()
        self.expect("{")
        parts = {}
        for section in SECTIONS:
            self.expect("ident", section)
            self.expect(":")
            parts[section] = self.effect_list() if section == "effects" else self.term_list()
        self.expect("}")
        return ActionSchema(name, tuple(parts["valid"]), tuple(parts["invalid"]),
                            tuple(parts["goal_block"]), tuple(parts["kb"]),
                            tuple(parts["effects"]), line)

    def action_clause(self, line: int) -> ActionSchema:
        self.expect("(")
        name = self.schema_name()
        lists = []
        for _ in range(4):
            self.expect(",")
            lists.append(tuple(self.term_list()))
        self.expect(",")
        effects = tuple(self.effect_list())
        self.expect(")")
        self.expect(".")
        return ActionSchema(name, *lists, effects, line)

    def durations_block(self, entries: dict, check: bool):
        self.expect("{")
        while not self.accept("}"):
            key = self.expect("ident")
            self.expect(":")
            self.expect("[")
            lo_tok = self.tok
            lo = self.number()
            self.expect(",")
            hi = self.number()
            self.expect("]")
            self.accept(",")
            if lo < 0 or hi < 0:
                raise self.error("duration bounds must be nonnegative", lo_tok, DurationError)
            if check and lo > hi:
                raise self.error(f"duration of {key.text}: lower bound {lo} exceeds upper bound {hi}",
                                 key, DurationError)
            entries[key.text] = (lo, hi)

    def domain(self, check_pairing: bool, check_durations: bool,
               default_bounds: tuple) -> DomainFile:
        schemas = []
        entries: dict = {}
        while not self.at("eof"):
            tok = self.tok
            if self.accept("ident", "action"):
                self.scope = {}
                if self.at("("):
                    schema = self.action_clause(tok.line)
                else:
                    schema = self.action_block(tok.line)
                loose = schema.unbound_effect_vars()
                if loose:
                    names = ", ".join(sorted({v.name for v in loose}))
                    raise self.error(f"effect variables {names} of {schema.name} are never bound", tok)
                schemas.append(schema)
            elif self.accept("ident", "durations"):
                self.durations_block(entries, check_durations)
            else:
                raise self.error(f"expected 'action' or 'durations', found {tok.text or 'end of input'!r}")
        if check_pairing:
            self.check_pairs(schemas)
        for schema in schemas:
            base = schema.durative_name
            if base is not None and base not in entries:
                entries[base] = default_bounds
        return DomainFile(tuple(schemas), DurationTable(entries, default_bounds))

    def check_pairs(self, schemas: list):
        def shape(name: Compound) -> tuple:
            return tuple(str(a) for a in name.args)

        ends = {(snap_base(s.functor), shape(s.name)) for s in schemas
                if s.functor.endswith("_end")}
        starts = {(snap_base(s.functor), shape(s.name)) for s in schemas
                  if s.functor.endswith("_start")}
        for s in schemas:
            base = snap_base(s.functor)
            if base is None:
                raise PairingError(f"action {s.name} is neither a _start nor an _end snap action",
                                   s.line, 1, s.functor, self.filename)
            key = (base, shape(s.name))
            if s.functor.endswith("_start") and key not in ends:
                raise PairingError(f"{s.name} has no matching {base}_end",
                                   s.line, 1, s.functor, self.filename)
            if s.functor.endswith("_end") and key not in starts:
                raise PairingError(f"{s.name} has no matching {base}_start",
                                   s.line, 1, s.functor, self.filename)

    # -- problem --

    def facts(self, what: str, ground: bool) -> list:
        self.expect("{")
        out = []
        seen = set()
        while not self.accept("}"):
            tok = self.tok
            self.scope = {}
            t = self.term()
            if ground and not is_ground(t):
                raise self.error(f"{what} literal {t} contains variables", tok, GroundnessError)
            if t in seen:
                raise self.error(f"duplicate {what} literal {t}", tok)
            seen.add(t)
            out.append(t)
            if not self.accept(","):
                self.accept(".")
        return out

    def problem(self) -> ProblemFile:
        blocks: dict = {}
        while not self.at("eof"):
            tok = self.tok
            if tok.kind != "ident" or tok.text not in ("kb", "init", "goal"):
                raise self.error(f"expected 'kb', 'init' or 'goal', found {tok.text or 'end of input'!r}")
            if tok.text in blocks:
                raise self.error(f"duplicate {tok.text} block")
            self.i += 1
            blocks[tok.text] = self.facts(tok.text, ground=True)
        for required in ("init", "goal"):
            if required not in blocks:
                raise self.error(f"missing {required} block")
        return ProblemFile(tuple(blocks.get("kb", ())), State(blocks["init"]),
                           tuple(blocks["goal"]))


def _run(fn, text: str, filename: Optional[str]):
    try:
        return fn()
    except DslError:
        raise
    except (ValueError, RecursionError) as exc:
        raise ParseError(str(exc), 0, 0, "", filename) from exc


def parse_term(text: str, aliases: bool = True) -> Term:
    p = _Parser(text, aliases=aliases)

    def go():
        t = p.term()
        p.expect("eof")
        return t

    return _run(go, text, None)


def parse_terms(text: str, aliases: bool = True) -> list:
    """Comma-separated terms, variables shared across the list."""
    p = _Parser(text, aliases=aliases)

    def go():
        out = []
        if p.at("eof"):
            return out
        out.append(p.term())
        while p.accept(","):
            out.append(p.term())
        p.expect("eof")
        return out

    return _run(go, text, None)


def parse_domain(text: str, *, filename: Optional[str] = None,
                 check_pairing: bool = True, check_durations: bool = True,
                 default_bounds: tuple = (Fraction(1), Fraction(10)),
                 aliases: bool = True) -> DomainFile:
    """Read a domain file.

    Raises :class:`ParseError` on syntax errors, :class:`PairingError` for a
    snap action without its partner and :class:`DurationError` for bounds
    with lower > upper (unless ``check_durations`` is off).
    """
    p = _Parser(text, filename, aliases)
    bounds = (Fraction(default_bounds[0]), Fraction(default_bounds[1]))
    return _run(lambda: p.domain(check_pairing, check_durations, bounds), text, filename)


def parse_problem(text: str, *, filename: Optional[str] = None,
                  aliases: bool = True) -> ProblemFile:
    p = _Parser(text, filename, aliases)
    return _run(p.problem, text, filename)


# -- printers ----------------------------------------------------------------

def _fmt_num(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    # exact decimal when one exists, else keep the fraction readable by Fraction()
    d = q.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d == 1:
        s = f"{float(q):.12f}".rstrip("0")
        if Fraction(s) == q:
            return s
    raise ValueError(f"{q} has no finite decimal form")


def format_term_list(ts) -> str:
    return "[" + ", ".join(str(t) for t in ts) + "]"


def format_schema(s: ActionSchema) -> str:
    effects = "[" + ", ".join(str(e) for e in s.effects) + "]"
    return (f"action {s.name} {{\n"
            f"  valid: {format_term_list(s.valid)}\n"
            f"  invalid: {format_term_list(s.invalid)}\n"
            f"  goal_block: {format_term_list(s.invalid_at_end)}\n"
            f"  kb: {format_term_list(s.kb_conds)}\n"
            f"  effects: {effects}\n"
            f"}}\n")


def format_domain(d: DomainFile) -> str:
    parts = [format_schema(s) for s in d.schemas]
    if d.durations.bounds:
        lines = [f"  {k}: [{_fmt_num(lo)}, {_fmt_num(hi)}]"
                 for k, (lo, hi) in d.durations.bounds.items()]
        parts.append("durations {\n" + "\n".join(lines) + "\n}\n")
    return "\n".join(parts)


def format_problem(p: ProblemFile) -> str:
    def block(name, ts):
        body = "".join(f"  {t}\n" for t in ts)
        return f"{name} {{\n{body}}}\n"

    return block("kb", p.kb_facts) + block("init", p.init.literals) + block("goal", p.goal)
