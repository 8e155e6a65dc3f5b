"""Seeded corruptions of test cases, one per error class the validator must catch."""
from __future__ import annotations

import random

from tempoplan.llm import TestCase
from tempoplan.terms import Atom, Compound, Int

KINDS = ("wrong-stack-order", "arity", "cycle", "duplicate")


def _stacks(lits):
    on = {t.args[1]: t.args[0] for t in lits if isinstance(t, Compound) and t.functor == "on"}
    out = []
    for t in lits:
        if isinstance(t, Compound) and t.functor == "ontable":
            tower = [t.args[0]]
            while tower[-1] in on:
                tower.append(on[tower[-1]])
            if len(tower) > 1:
                out.append(tower)
    return out


def _rename(t, mapping):
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_rename(a, mapping) for a in t.args))
    return mapping.get(t, t)


def reverse_stack(lits, rng):
    tower = rng.choice(_stacks(lits))
    mapping = dict(zip(tower, reversed(tower)))
    return tuple(_rename(t, mapping) if t.functor in ("on", "ontable", "clear") else t for t in lits)


def _with_section(tc, section, lits):
    if section == "init":
        return TestCase(tc.name, lits, tc.goal)
    return TestCase(tc.name, tc.init, lits)


def mutate(tc, kind, rng):
    sections = ["init", "goal"]
    if kind == "wrong-stack-order":
        sections = [s for s in sections if _stacks(getattr(tc, s))]
    section = rng.choice(sections)
    lits = list(getattr(tc, section))
    if kind == "wrong-stack-order":
        lits = list(reverse_stack(lits, rng))
    elif kind == "arity":
        k = rng.randrange(len(lits))
        t = lits[k]
        args = t.args[:-1] if len(t.args) > 1 else t.args + (Int(0),)
        lits[k] = Compound(t.functor, args)
    elif kind == "cycle":
        x, y = Atom("b8"), Atom("b9")
        c = Int(rng.randint(6, 9))
        lits += [Compound("on", (x, y, c, c)), Compound("on", (y, x, c, c))]
    elif kind == "duplicate":
        lits.insert(rng.randrange(len(lits) + 1), rng.choice(lits))
    return _with_section(tc, section, tuple(lits))


def mutation_suite(cases, n=20, seed=0):
    """``n`` mutants as ``(kind, original, mutant)``, kinds in rotation."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        kind = KINDS[i % len(KINDS)]
        pool = [tc for tc in cases if kind != "wrong-stack-order" or _stacks(tc.init) or _stacks(tc.goal)]
        original = rng.choice(pool)
        out.append((kind, original, mutate(original, kind, rng)))
    return out
