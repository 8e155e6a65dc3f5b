"""Simple Temporal Networks built from last-achiever links.

Edges follow the distance-graph convention: ``Edge(u, v, w)`` encodes
``t_v - t_u <= w``.  Timepoint 0 is the plan origin, fixed at time 0; step
``k`` of the plan is timepoint ``k``.  All arithmetic is exact
(:class:`fractions.Fraction`); solvers scale to integers internally.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .domain import DurationTable
from .planner import TotalOrderPlan
from .porder import AchieverMap

ORDER = "order"
DELETER = "deleter"
UPPER = "upper"
LOWER = "lower"
ORDERING_KINDS = (ORDER, DELETER)


class UnmatchedSnap(Exception):
    pass


class Inconsistent(Exception):
    def __init__(self, witness):
        super().__init__("temporal network has a negative cycle")
        self.witness = witness


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    weight: Fraction
    kind: str = ORDER


@dataclass
class Stn:
    labels: list = field(default_factory=lambda: ["a0"])
    edges: list = field(default_factory=list)
    pairs: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.labels)

    def ordering_edges(self) -> list:
        return [e for e in self.edges if e.kind in ORDERING_KINDS]

    def duration_pairs(self) -> list:
        return list(self.pairs)

    def add(self, src: int, dst: int, weight, kind: str = ORDER) -> Edge:
        e = Edge(src, dst, Fraction(weight), kind)
        self.edges.append(e)
        return e


@dataclass(frozen=True)
class Consistency:
    consistent: bool
    witness: tuple = ()

    def __bool__(self) -> bool:
        return self.consistent


class Consistent(Consistency):
    def __init__(self):
        super().__init__(True, ())


class NegativeCycle(Consistency):
    """Inconsistent result; ``witness`` is the cycle's edges in path order."""

    def __init__(self, witness: tuple):
        super().__init__(False, tuple(witness))

    @property
    def weight(self) -> Fraction:
        return sum((e.weight for e in self.witness), Fraction(0))


@dataclass(frozen=True)
class Schedule:
    times: dict
    makespan: Fraction
    labels: tuple = ()
    closure: Optional[list] = None

    def __getitem__(self, node: int) -> Fraction:
        return self.times[node]


def fmt_rational(q):
    """JSON-friendly exact number: int when integral, else ``"p/q"``."""
    q = Fraction(q)
    return q.numerator if q.denominator == 1 else str(q)


def parse_rational(x) -> Fraction:
    return Fraction(x) if not isinstance(x, float) else Fraction(str(x))


def match_snaps(plan: TotalOrderPlan) -> list:
    """``(start_index, end_index, durative_name)`` for every durative action."""
    open_starts: dict = {}
    pairs = []
    for step in plan.steps:
        act = step.action
        base = act.durative_name
        if base is None:
            continue
        key = (base, act.ground_name.args)
        if act.is_start:
            open_starts.setdefault(key, deque()).append(step.index)
        else:
            queue = open_starts.get(key)
            if not queue:
                raise UnmatchedSnap(f"step {step.index} ({act}) ends an action that never started")
            pairs.append((queue.popleft(), step.index, base))
    dangling = [i for q in open_starts.values() for i in q]
    if dangling:
        step = plan.steps[min(dangling) - 1]
        raise UnmatchedSnap(f"step {step.index} ({step.action}) starts an action that never ends")
    return sorted(pairs)


def _reaches(succ: dict, a: int, b: int) -> bool:
    if a == b:
        return True
    seen = {a}
    todo = [a]
    while todo:
        x = todo.pop()
        for y in succ.get(x, ()):
            if y == b:
                return True
            if y not in seen:
                seen.add(y)
                todo.append(y)
    return False


def build_stn(plan: TotalOrderPlan, la: AchieverMap, durations: DurationTable,
              deleter_edges: bool = True) -> Stn:
    """Ordering edges from achiever links, plus duration bounds per pair.

    With ``deleter_edges`` a step that deletes a precondition of an earlier
    step is ordered after it, unless that order already follows from the
    existing edges.
    """
    stn = Stn(["a0"] + [str(s.action.ground_name) for s in plan.steps])
    succ: dict = {}

    def order(i: int, j: int, kind: str):
        # t_j >= t_i
        stn.add(j, i, 0, kind)
        succ.setdefault(i, set()).add(j)

    for i, j in la.edges():
        order(i, j, ORDER)
    pairs = match_snaps(plan)
    if deleter_edges:
        pres = {s.index: set(s.action.preconditions()) for s in plan.steps}
        dels = {s.index: set(s.action.deletes()) for s in plan.steps}
        for j in range(1, len(plan.steps) + 1):
            for k in range(j + 1, len(plan.steps) + 1):
                if pres[j] & dels[k] and not _reaches(succ, j, k):
                    order(j, k, DELETER)
    for s, e, base in pairs:
        if not _reaches(succ, s, e):
            order(s, e, ORDER)
        lo, hi = durations.get(base)
        stn.add(s, e, hi, UPPER)
        stn.add(e, s, -lo, LOWER)
        stn.pairs.append((s, e, base))
    return stn


def _scaled(stn: Stn):
    scale = 1
    for e in stn.edges:
        scale = scale * e.weight.denominator // math.gcd(scale, e.weight.denominator)
    weights = [int(e.weight * scale) for e in stn.edges]
    return scale, weights


def check_consistency(stn: Stn) -> Consistency:
    """Bellman-Ford from a virtual source tied to every timepoint."""
    n = stn.n
    _, w = _scaled(stn)
    edges = stn.edges
    dist = [0] * n
    pred: list = [None] * n
    last = None
    for _ in range(n):
        last = None
        for k, e in enumerate(edges):
            nd = dist[e.src] + w[k]
            if nd < dist[e.dst]:
                dist[e.dst] = nd
                pred[e.dst] = k
                last = e.dst
        if last is None:
            return Consistent()
    x = last
    for _ in range(n):
        x = edges[pred[x]].src
    cycle = []
    y = x
    while True:
        k = pred[y]
        cycle.append(edges[k])
        y = edges[k].src
        if y == x:
            break
    cycle.reverse()
    return NegativeCycle(tuple(cycle))


def distances_to_origin(stn: Stn) -> list:
    """Shortest distance from every timepoint to the origin (None if unreachable)."""
    n = stn.n
    scale, w = _scaled(stn)
    dist: list = [None] * n
    dist[0] = 0
    for _ in range(n):
        changed = False
        for k, e in enumerate(stn.edges):
            # reversed graph: relax e.dst -> e.src
            if dist[e.dst] is not None:
                nd = dist[e.dst] + w[k]
                if dist[e.src] is None or nd < dist[e.src]:
                    dist[e.src] = nd
                    changed = True
        if not changed:
            return [None if d is None else Fraction(d, scale) for d in dist]
    raise Inconsistent(check_consistency(stn).witness)


def closure(stn: Stn) -> list:
    """All-pairs shortest distances (Floyd-Warshall); ``None`` = no path.

    Raises :class:`Inconsistent` when some diagonal entry turns negative.
    """
    n = stn.n
    scale, w = _scaled(stn)
    d: list = [[None] * n for _ in range(n)]
    for i in range(n):
        d[i][i] = 0
    for k, e in enumerate(stn.edges):
        cur = d[e.src][e.dst]
        if cur is None or w[k] < cur:
            d[e.src][e.dst] = w[k]
    for k in range(n):
        dk = d[k]
        for i in range(n):
            dik = d[i][k]
            if dik is None:
                continue
            di = d[i]
            for j in range(n):
                dkj = dk[j]
                if dkj is None:
                    continue
                v = dik + dkj
                if di[j] is None or v < di[j]:
                    di[j] = v
    if any(d[i][i] < 0 for i in range(n)):
        raise Inconsistent(())
    return [[None if x is None else Fraction(x, scale) for x in row] for row in d]


def _makespan(stn: Stn, times: dict) -> Fraction:
    ends = [e for _, e, _ in stn.pairs]
    pool = [times[e] for e in ends] if ends else list(times.values())
    return max(pool, default=Fraction(0))


def earliest_schedule(stn: Stn) -> Schedule:
    """Earliest time of every timepoint: minus its distance to the origin."""
    res = check_consistency(stn)
    if not res:
        raise Inconsistent(res.witness)
    dist = distances_to_origin(stn)
    times = {}
    for x, d in enumerate(dist):
        if d is None:
            raise ValueError(f"timepoint {stn.labels[x]} has no path to the origin")
        times[x] = -d
    return Schedule(times, _makespan(stn, times), tuple(stn.labels))


def minimize_makespan(stn: Stn) -> Schedule:
    """Makespan-minimal schedule, with the minimal distance closure attached.

    For an STN the earliest-time vector is already makespan-minimal; the
    closure is computed independently and must agree with it.
    """
    sched = earliest_schedule(stn)
    d = closure(stn)
    for x in range(stn.n):
        if -d[x][0] != sched.times[x]:
            raise AssertionError(f"closure disagrees on timepoint {x}")
    return Schedule(sched.times, sched.makespan, sched.labels, d)


def tightened(stn: Stn) -> Stn:
    """STN whose edges are the finite entries of the minimal closure."""
    d = closure(stn)
    out = Stn(list(stn.labels), [], list(stn.pairs))
    for i in range(stn.n):
        for j in range(stn.n):
            if i != j and d[i][j] is not None:
                out.add(i, j, d[i][j], "closure")
    return out


# -- export ------------------------------------------------------------------

def stn_to_json(stn: Stn) -> dict:
    return {
        "nodes": [{"id": i, "label": lab} for i, lab in enumerate(stn.labels)],
        "edges": [{"from": e.src, "to": e.dst, "weight": fmt_rational(e.weight), "kind": e.kind}
                  for e in stn.edges],
        "pairs": [{"start": s, "end": e, "action": base} for s, e, base in stn.pairs],
    }


def stn_from_json(data: dict) -> Stn:
    nodes = sorted(data["nodes"], key=lambda n: n["id"])
    stn = Stn([n["label"] for n in nodes])
    for e in data["edges"]:
        stn.add(e["from"], e["to"], parse_rational(e["weight"]), e.get("kind", ORDER))
    stn.pairs = [(p["start"], p["end"], p["action"]) for p in data.get("pairs", [])]
    return stn


def stn_to_dot(stn: Stn) -> str:
    lines = ["digraph stn {", "  rankdir=LR;"]
    for i, lab in enumerate(stn.labels):
        lines.append(f'  n{i} [label="a{i}: {lab}"];' if i else f'  n0 [label="a0"];')
    for e in stn.edges:
        if e.kind in ORDERING_KINDS:
            style = ' style=dotted' if e.kind == DELETER else ""
            lines.append(f'  n{e.dst} -> n{e.src} [label="0"{style}];')
        elif e.kind == LOWER:
            lines.append(f'  n{e.src} -> n{e.dst} [label="{e.weight}" style=dashed];')
        else:
            lines.append(f'  n{e.src} -> n{e.dst} [label="{e.weight}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def schedule_to_json(sched: Schedule) -> dict:
    return {
        "times": [{"node": i, "label": sched.labels[i] if sched.labels else str(i),
                   "time": fmt_rational(t)} for i, t in sorted(sched.times.items())],
        "makespan": fmt_rational(sched.makespan),
    }
