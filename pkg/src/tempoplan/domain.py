"""States, the static knowledge base, action schemas and their semantics.

Conditions are matched in clause order: condition lists left to right, state
literals in insertion order, knowledge-base facts in declaration order.  All
enumeration here is therefore deterministic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .terms import (
    EMPTY,
    Compound,
    Substitution,
    Term,
    apply,
    is_ground,
    term_key,
    unify,
    variables,
)

LOGGER = logging.getLogger(__name__)

START_SUFFIX = "_start"
END_SUFFIX = "_end"


class DomainError(Exception):
    pass


class DelMissing(DomainError):
    """A ``del`` effect names a literal that is not in the state."""


class AddDuplicate(DomainError):
    """An ``add`` effect names a literal that is already in the state."""


class State:
    """Ordered list of ground literals with set semantics for equality."""

    __slots__ = ("literals", "_set")

    def __init__(self, literals: Iterable[Term] = ()):
        lits = tuple(literals)
        seen = set()
        for lit in lits:
            if not is_ground(lit):
                raise ValueError(f"state literal {lit} is not ground")
            if lit in seen:
                raise ValueError(f"duplicate state literal {lit}")
            seen.add(lit)
        self.literals = lits
        self._set = frozenset(seen)

    @classmethod
    def _trusted(cls, literals: tuple, members: frozenset) -> "State":
        st = cls.__new__(cls)
        st.literals = literals
        st._set = members
        return st

    @property
    def key(self) -> frozenset:
        return self._set

    def canonical(self) -> tuple:
        return tuple(sorted(self.literals, key=term_key))

    def __contains__(self, lit) -> bool:
        return lit in self._set

    def __iter__(self):
        return iter(self.literals)

    def __len__(self) -> int:
        return len(self.literals)

    def __eq__(self, other):
        if isinstance(other, State):
            return self._set == other._set
        return NotImplemented

    def __hash__(self):
        return hash(self._set)

    def __repr__(self) -> str:
        return "State([" + ", ".join(str(t) for t in self.literals) + "])"


def states_equal(a: State, b: State) -> bool:
    return a.canonical() == b.canonical()


@dataclass(frozen=True)
class StaticKb:
    facts: tuple = ()
    goal_literals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "facts", tuple(self.facts))
        object.__setattr__(self, "goal_literals", tuple(self.goal_literals))
        for t in self.facts + self.goal_literals:
            if not is_ground(t):
                raise ValueError(f"knowledge-base literal {t} is not ground")


@dataclass(frozen=True)
class Effect:
    kind: str  # "add" | "del"
    literal: Term

    def __post_init__(self):
        if self.kind not in ("add", "del"):
            raise ValueError(f"effect kind must be add or del, got {self.kind!r}")

    def substitute(self, s: Substitution) -> "Effect":
        return Effect(self.kind, apply(s, self.literal))

    def __str__(self) -> str:
        return f"{self.kind}({self.literal})"


@dataclass(frozen=True, eq=False)
class ActionSchema:
    """Action template: a name pattern, four condition lists, and effects.

    ``invalid_at_end`` is the goal-protection list: a binding under which
    one of its literals is part of the goal is pruned.
    """

    name: Compound
    valid: tuple = ()
    invalid: tuple = ()
    invalid_at_end: tuple = ()
    kb_conds: tuple = ()
    effects: tuple = ()
    line: int = 0

    @property
    def functor(self) -> str:
        return self.name.functor

    @property
    def durative_name(self) -> Optional[str]:
        return snap_base(self.name.functor)

    @property
    def is_start(self) -> bool:
        return self.name.functor.endswith(START_SUFFIX)

    def unbound_effect_vars(self) -> list:
        bound = set()
        for t in (self.name, *self.valid, *self.kb_conds):
            bound.update(v.id for v in variables(t))
        out = []
        for e in self.effects:
            out.extend(v for v in variables(e.literal) if v.id not in bound)
        return out


def snap_base(functor: str) -> Optional[str]:
    """``grip_start`` -> ``grip``; ``None`` for non-snap names."""
    for suffix in (START_SUFFIX, END_SUFFIX):
        if functor.endswith(suffix) and len(functor) > len(suffix):
            return functor[: -len(suffix)]
    return None


@dataclass(frozen=True)
class DurationTable:
    bounds: dict = field(default_factory=dict)
    default: tuple = (Fraction(1), Fraction(10))

    def __post_init__(self):
        clean = {k: (Fraction(lo), Fraction(hi)) for k, (lo, hi) in self.bounds.items()}
        object.__setattr__(self, "bounds", clean)
        lo, hi = self.default
        object.__setattr__(self, "default", (Fraction(lo), Fraction(hi)))

    def get(self, name: str) -> tuple:
        return self.bounds.get(name, self.default)

    def __getitem__(self, name: str) -> tuple:
        return self.get(name)

    def inverted(self) -> list:
        """Names whose lower bound exceeds the upper bound."""
        out = [k for k, (lo, hi) in self.bounds.items() if lo > hi]
        if self.default[0] > self.default[1]:
            out.append("<default>")
        return out

    def with_bounds(self, **bounds) -> "DurationTable":
        merged = dict(self.bounds)
        merged.update(bounds)
        return DurationTable(merged, self.default)


@dataclass(frozen=True, eq=False)
class GroundAction:
    schema: ActionSchema
    binding: Substitution
    ground_name: Compound
    schema_index: int = -1

    def preconditions(self) -> tuple:
        return tuple(apply(self.binding, c) for c in self.schema.valid)

    def effects(self) -> tuple:
        return tuple(e.substitute(self.binding) for e in self.schema.effects)

    def adds(self) -> tuple:
        return tuple(e.literal for e in self.effects() if e.kind == "add")

    def deletes(self) -> tuple:
        return tuple(e.literal for e in self.effects() if e.kind == "del")

    @property
    def durative_name(self) -> Optional[str]:
        return snap_base(self.ground_name.functor)

    @property
    def is_start(self) -> bool:
        return self.ground_name.functor.endswith(START_SUFFIX)

    @property
    def is_end(self) -> bool:
        return self.ground_name.functor.endswith(END_SUFFIX)

    def __str__(self) -> str:
        return str(self.ground_name)

    def __repr__(self) -> str:
        return f"GroundAction({self.ground_name})"


def satisfy_all(conds: Sequence[Term], state: State,
                s: Substitution = EMPTY) -> Iterator[Substitution]:
    """All extensions of ``s`` matching each condition to a distinct literal."""
    lits = state.literals

    def go(i: int, s: Substitution, used: frozenset):
        if i == len(conds):
            yield s
            return
        cond = apply(s, conds[i])
        if is_ground(cond):
            # fast path: membership test, then find its index for distinctness
            if cond in state:
                idx = lits.index(cond)
                if idx not in used:
                    yield from go(i + 1, s, used | {idx})
            return
        for idx, lit in enumerate(lits):
            if idx in used:
                continue
            s2 = unify(cond, lit, s)
            if s2 is not None:
                yield from go(i + 1, s2, used | {idx})

    yield from go(0, s, frozenset())


def _matches_any(cond: Term, literals: Iterable[Term], s: Substitution) -> bool:
    cond = apply(s, cond)
    if is_ground(cond):
        return cond in literals
    return any(unify(cond, lit, s) is not None for lit in literals)


def violates_any(conds: Sequence[Term], state: State,
                 s: Substitution = EMPTY) -> bool:
    """True iff some condition (remaining variables existential) holds."""
    return any(_matches_any(c, state, s) for c in conds)


def blocked_by_goal(conds: Sequence[Term], kb: StaticKb,
                    s: Substitution = EMPTY) -> bool:
    goal = frozenset(kb.goal_literals)
    for c in conds:
        c = apply(s, c)
        if is_ground(c):
            if c in goal:
                return True
        elif any(unify(c, g, s) is not None for g in kb.goal_literals):
            return True
    return False


def ground_via_kb(conds: Sequence[Term], kb: StaticKb,
                  s: Substitution = EMPTY) -> Iterator[Substitution]:
    """Extensions of ``s`` matching each condition to a KB fact or goal literal."""
    pool = kb.facts + kb.goal_literals

    def go(i: int, s: Substitution):
        if i == len(conds):
            yield s
            return
        cond = apply(s, conds[i])
        for lit in pool:
            s2 = unify(cond, lit, s)
            if s2 is not None:
                yield from go(i + 1, s2)

    yield from go(0, s)


def apply_effects(state: State, effects: Sequence[Effect]) -> State:
    lits = list(state.literals)
    members = set(state.key)
    for eff in effects:
        lit = eff.literal
        if eff.kind == "del":
            if is_ground(lit):
                if lit not in members:
                    raise DelMissing(f"del({lit}): literal not in state")
                lits.remove(lit)
                members.discard(lit)
            else:
                for i, cand in enumerate(lits):
                    if unify(lit, cand) is not None:
                        LOGGER.warning("non-ground del(%s) removed %s", lit, cand)
                        members.discard(cand)
                        del lits[i]
                        break
                else:
                    raise DelMissing(f"del({lit}): no unifying literal in state")
        else:
            if not is_ground(lit):
                raise DomainError(f"add({lit}): literal is not ground")
            if lit in members:
                raise AddDuplicate(f"add({lit}): literal already in state")
            lits.append(lit)
            members.add(lit)
    return State._trusted(tuple(lits), frozenset(members))


def goal_reached(state: State, goal: Sequence[Term], mode: str = "equality") -> bool:
    if mode == "equality":
        return state.key == frozenset(goal)
    if mode == "subset":
        return all(g in state for g in goal)
    raise ValueError(f"unknown goal mode {mode!r}")


def applicable_actions(state: State, kb: StaticKb,
                       schemas: Sequence[ActionSchema]) -> Iterator[GroundAction]:
    """Ground actions applicable in ``state``, in clause order.

    The four checks run in a fixed sequence: valid conditions, invalid
    conditions, goal protection, knowledge-base grounding.  Variables still
    free when a negative check runs are read existentially.
    """
    for index, schema in enumerate(schemas):
        seen = set()
        for s1 in satisfy_all(schema.valid, state):
            if violates_any(schema.invalid, state, s1):
                continue
            if blocked_by_goal(schema.invalid_at_end, kb, s1):
                continue
            for s2 in ground_via_kb(schema.kb_conds, kb, s1):
                name = apply(s2, schema.name)
                if not is_ground(name):
                    LOGGER.debug("skipping under-grounded %s", name)
                    continue
                effects = tuple(e.substitute(s2) for e in schema.effects)
                key = (name, effects)
                if key in seen:
                    continue
                seen.add(key)
                yield GroundAction(schema, s2, name, index)


def check_action(action: GroundAction, state: State, kb: StaticKb) -> Optional[str]:
    """Name of the first check ``action`` fails in ``state``, else ``None``."""
    schema, s = action.schema, action.binding
    if next(satisfy_all(schema.valid, state, s), None) is None:
        return "valid"
    if violates_any(schema.invalid, state, s):
        return "invalid"
    if blocked_by_goal(schema.invalid_at_end, kb, s):
        return "goal_block"
    if next(ground_via_kb(schema.kb_conds, kb, s), None) is None:
        return "kb"
    return None
