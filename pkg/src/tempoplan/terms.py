"""Logic terms, substitutions and unification.

Terms are immutable values.  Variables are identified by an integer id that
is handed out when a clause is read, so two ``X`` written in different
action schemas never refer to the same variable.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Union

_IDENT = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
_var_ids = itertools.count(1)


def fresh_id() -> int:
    return next(_var_ids)


@dataclass(frozen=True)
class Atom:
    name: str

    def __post_init__(self):
        if not _IDENT.match(self.name):
            raise ValueError(f"bad atom name {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Var:
    name: str = field(compare=False)
    id: int

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"Var({self.name}#{self.id})"


@dataclass(frozen=True)
class Int:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple

    def __post_init__(self):
        if not _IDENT.match(self.functor):
            raise ValueError(f"bad functor name {self.functor!r}")
        if not self.args:
            raise ValueError("compound term needs at least one argument")
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))

    @property
    def arity(self) -> int:
        return len(self.args)

    def __str__(self) -> str:
        return f"{self.functor}({','.join(str(a) for a in self.args)})"


Term = Union[Atom, Var, Int, Compound]


def var(name: str) -> Var:
    """A new variable with a unique id."""
    return Var(name, fresh_id())


def compound(functor: str, *args) -> Compound:
    """Build a compound term, lifting ``int`` and ``str`` arguments.

    Strings starting with an uppercase letter or ``_`` are NOT turned into
    variables here; pass :class:`Var` objects explicitly.
    """
    return Compound(functor, tuple(_lift(a) for a in args))


def _lift(x) -> Term:
    if isinstance(x, (Atom, Var, Int, Compound)):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not terms")
    if isinstance(x, int):
        return Int(x)
    if isinstance(x, str):
        return Atom(x)
    raise TypeError(f"cannot lift {x!r} to a term")


def signature(t: Term) -> tuple[str, int]:
    """``(functor, arity)``; atoms have arity 0."""
    if isinstance(t, Compound):
        return t.functor, len(t.args)
    if isinstance(t, Atom):
        return t.name, 0
    raise TypeError(f"{t} has no functor")


def variables(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Compound):
        for a in t.args:
            yield from variables(a)


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Compound):
        return all(is_ground(a) for a in t.args)
    return True


class Substitution(Mapping):
    """Immutable map from variable id to term.

    Bindings are stored in triangular form; :func:`apply` resolves chains
    until no bound variable is left.
    """

    __slots__ = ("_b",)

    def __init__(self, bindings: Optional[Mapping[int, Term]] = None):
        self._b = dict(bindings) if bindings else {}

    def __getitem__(self, key: int) -> Term:
        return self._b[key]

    def __iter__(self):
        return iter(self._b)

    def __len__(self) -> int:
        return len(self._b)

    def __hash__(self):
        return hash(frozenset(self._b.items()))

    def __eq__(self, other):
        if isinstance(other, Substitution):
            return self._b == other._b
        return NotImplemented

    def bind(self, v: Var, t: Term) -> "Substitution":
        new = Substitution()
        new._b = dict(self._b)
        new._b[v.id] = t
        return new

    def walk(self, t: Term) -> Term:
        while isinstance(t, Var) and t.id in self._b:
            t = self._b[t.id]
        return t

    def resolved(self) -> dict[int, Term]:
        """Every binding fully applied."""
        return {k: apply(self, v) for k, v in self._b.items()}

    def __repr__(self) -> str:
        inner = ", ".join(f"#{k}↦{v}" for k, v in self._b.items())
        return f"Substitution({{{inner}}})"


EMPTY = Substitution()


def apply(s: Substitution, t: Term) -> Term:
    if not s:
        return t
    t = s.walk(t)
    if isinstance(t, Compound):
        args = tuple(apply(s, a) for a in t.args)
        if args == t.args:
            return t
        return Compound(t.functor, args)
    return t


def _occurs(v: Var, t: Term, s: Substitution) -> bool:
    t = s.walk(t)
    if isinstance(t, Var):
        return t.id == v.id
    if isinstance(t, Compound):
        return any(_occurs(v, a, s) for a in t.args)
    return False


def unify(a: Term, b: Term, s: Substitution = EMPTY,
          occurs_check: bool = False) -> Optional[Substitution]:
    """Most general unifier of ``a`` and ``b`` extending ``s``, or ``None``."""
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = s.walk(x)
        y = s.walk(y)
        if x is y or x == y:
            continue
        if isinstance(x, Var):
            if occurs_check and _occurs(x, y, s):
                return None
            s = s.bind(x, y)
        elif isinstance(y, Var):
            if occurs_check and _occurs(y, x, s):
                return None
            s = s.bind(y, x)
        elif isinstance(x, Compound) and isinstance(y, Compound):
            if x.functor != y.functor or len(x.args) != len(y.args):
                return None
            stack.extend(zip(x.args, y.args))
        else:
            return None
    return s


def rename(t: Term, mapping: Optional[dict[int, Var]] = None) -> Term:
    """Copy ``t`` with every variable replaced by a fresh one.

    Pass the same ``mapping`` for several terms to keep shared variables
    shared.
    """
    if mapping is None:
        mapping = {}
    if isinstance(t, Var):
        if t.id not in mapping:
            mapping[t.id] = Var(t.name, fresh_id())
        return mapping[t.id]
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(rename(a, mapping) for a in t.args))
    return t


def term_key(t: Term) -> tuple:
    """Total order key used to sort terms into canonical form."""
    if isinstance(t, Int):
        return (0, t.value)
    if isinstance(t, Atom):
        return (1, t.name)
    if isinstance(t, Var):
        return (2, t.id)
    return (3, t.functor, len(t.args), tuple(term_key(a) for a in t.args))


def format_terms(ts: Iterable[Term], sep: str = ", ") -> str:
    return sep.join(str(t) for t in ts)
