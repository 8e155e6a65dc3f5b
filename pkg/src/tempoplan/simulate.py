"""Discrete-event execution of behavior trees on a virtual clock.

A run first assigns a firing time to every leaf: composites pass their
start time down, a Sequence chains its children, a Parallel starts all of
them together and finishes with the slowest.  The end snap of a durative
action fires no earlier than its start plus a sampled duration.  Leaves are
then replayed in (time, tree order) against the evolving state.
"""
from __future__ import annotations

import logging
import random
import statistics
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional

from .bt import ActionLeaf, ApplyEffect, CheckCondition, Parallel, Sequence
from .domain import DomainError, DurationTable, State, apply_effects, goal_reached, snap_base
from .terms import is_ground, unify

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimFailure:
    trial: int
    time: float
    location: str
    node: str
    message: str


@dataclass
class SimReport:
    trials: int
    successes: int = 0
    makespans: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    envelope: Optional[tuple] = None
    traces: list = field(default_factory=list)

    @property
    def makespan_min(self) -> float:
        return min(self.makespans, default=0.0)

    @property
    def makespan_max(self) -> float:
        return max(self.makespans, default=0.0)

    @property
    def makespan_mean(self) -> float:
        return statistics.fmean(self.makespans) if self.makespans else 0.0

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "successes": self.successes,
            "makespan_min": self.makespan_min,
            "makespan_mean": self.makespan_mean,
            "makespan_max": self.makespan_max,
            "envelope": list(self.envelope) if self.envelope else None,
            "failures": [asdict(f) for f in self.failures],
        }


@dataclass(frozen=True)
class _Event:
    time: float
    seq: int
    path: str
    leaf: object


def _duration(bounds: tuple, rng: Optional[random.Random], mode: str) -> float:
    lo, hi = float(bounds[0]), float(bounds[1])
    if mode == "lower":
        return lo
    if mode == "upper":
        return hi
    return rng.uniform(lo, hi)


def _schedule(bt, durations: DurationTable, rng, mode: str) -> list:
    events: list = []
    open_starts: dict = {}
    seq = [0]

    def key_of(leaf: ActionLeaf):
        return snap_base(leaf.snap.functor), leaf.snap.args

    def fire_time(leaf: ActionLeaf, t: float) -> float:
        base, args = key_of(leaf)
        if base is None:
            return t
        if leaf.role == "start":
            d = _duration(durations.get(base), rng, mode)
            open_starts.setdefault((base, args), deque()).append(t + d)
            return t
        queue = open_starts.get((base, args))
        return max(t, queue.popleft()) if queue else t

    def visit(node, t: float, path: str) -> float:
        if isinstance(node, Parallel):
            ends = [visit(c, t, f"{path}/{i}") for i, c in enumerate(node.children)]
            return max(ends, default=t)
        if isinstance(node, Sequence):
            leaf = next((c for c in node.children if isinstance(c, ActionLeaf)), None)
            if leaf is not None and all(not isinstance(c, (Sequence, Parallel)) for c in node.children):
                # one snap action: every leaf fires at the action's instant
                t = fire_time(leaf, t)
                for i, c in enumerate(node.children):
                    events.append(_Event(t, seq[0], f"{path}/{i}", c))
                    seq[0] += 1
                return t
            for i, c in enumerate(node.children):
                t = visit(c, t, f"{path}/{i}")
            return t
        if isinstance(node, ActionLeaf):
            t = fire_time(node, t)
        events.append(_Event(t, seq[0], path, node))
        seq[0] += 1
        return t

    visit(bt, 0.0, "")
    events.sort(key=lambda e: (e.time, e.seq))
    return events


def _holds(literal, state: State) -> bool:
    if is_ground(literal):
        return literal in state
    return any(unify(literal, lit) is not None for lit in state)


def run_once(bt, init: State, goal, durations: DurationTable, rng=None,
             mode: str = "sample", trial: int = 0, goal_mode: str = "equality"):
    """One execution; returns ``(ok, makespan, failure, trace)``."""
    state = init
    trace = []
    makespan = 0.0
    for ev in _schedule(bt, durations, rng, mode):
        leaf = ev.leaf
        where = ev.path or "/"
        makespan = max(makespan, ev.time)
        if isinstance(leaf, CheckCondition):
            if not _holds(leaf.literal, state):
                return False, makespan, SimFailure(trial, ev.time, where, f"Condition {leaf.literal}",
                                                   "condition does not hold"), trace
        elif isinstance(leaf, ApplyEffect):
            try:
                state = apply_effects(state, (leaf.effect,))
            except DomainError as exc:
                return False, makespan, SimFailure(trial, ev.time, where, f"Effect {leaf.effect}",
                                                   str(exc)), trace
        elif isinstance(leaf, ActionLeaf):
            trace.append((ev.time, leaf.step, str(leaf.snap), leaf.role))
    if not goal_reached(state, goal, goal_mode):
        return False, makespan, SimFailure(trial, makespan, "/", "goal", "goal state not reached"), trace
    return True, makespan, None, trace


def simulate(bt, init: State, goal, durations: DurationTable, trials: int = 100,
             seed: int = 0, goal_mode: str = "equality", keep_traces: bool = False) -> SimReport:
    """Run ``trials`` seeded executions with uniformly sampled durations."""
    rng = random.Random(seed)
    report = SimReport(trials)
    for k in range(trials):
        ok, makespan, failure, trace = run_once(bt, init, goal, durations, rng, "sample", k, goal_mode)
        if ok:
            report.successes += 1
            report.makespans.append(makespan)
        else:
            report.failures.append(failure)
        if keep_traces:
            report.traces.append(trace)
    lo = run_once(bt, init, goal, durations, mode="lower", goal_mode=goal_mode)
    hi = run_once(bt, init, goal, durations, mode="upper", goal_mode=goal_mode)
    report.envelope = (lo[1], hi[1])
    if report.failures:
        LOGGER.info("%d of %d runs failed", len(report.failures), trials)
    return report
