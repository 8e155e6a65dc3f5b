"""End-to-end run: parse, plan, order, schedule, build the tree, simulate."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from importlib.resources import files
from pathlib import Path
from typing import Optional

from . import bt as btmod
from .dsl import DomainFile, DslError, ProblemFile, parse_domain, parse_problem
from .planner import NoPlan, SearchConfig, SearchStats, TotalOrderPlan, iter_plans, plan_to_json, validate
from .porder import achievers, last_achievers
from .simulate import SimReport, simulate
from .stn import Stn, build_stn, check_consistency, minimize_makespan, schedule_to_json, stn_to_dot, stn_to_json

LOGGER = logging.getLogger(__name__)

EXIT_OK, EXIT_OTHER, EXIT_PARSE, EXIT_NO_PLAN, EXIT_INCONSISTENT, EXIT_SIM = 0, 1, 2, 3, 4, 5

ARTIFACTS = ("plan.json", "stn.dot", "stn.json", "schedule.json", "bt.xml", "bt.dot", "sim.json")


class StageError(Exception):
    def __init__(self, stage: str, code: int, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.code = code


@dataclass
class PipelineConfig:
    domain: str
    problem: str
    max_depth: int = 30
    goal_mode: str = "equality"
    default_bounds: tuple = (Fraction(1), Fraction(10))
    replan_attempts: int = 5
    out_dir: Optional[str] = None
    seed: int = 0
    trials: int = 100
    check_durations: bool = False

    def __post_init__(self):
        if self.replan_attempts < 1:
            raise ValueError("replan_attempts must be at least 1")


@dataclass
class PipelineResult:
    plan: TotalOrderPlan
    stn: Stn
    schedule: object
    tree: object
    sim: SimReport
    attempts: int
    diagnostics: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)


def resolve_path(name: str) -> Path:
    """A file path, or the name of a bundled file such as ``blocks_world.domain``."""
    p = Path(name)
    if p.exists():
        return p
    bundled = files("tempoplan.data")
    for candidate in (name, f"{name}.domain", f"{name}.problem", f"{name}.problems"):
        ref = bundled.joinpath(candidate)
        if ref.is_file():
            return Path(str(ref))
    return p


def load_domain(path: str, default_bounds=(1, 10), check_durations: bool = True) -> DomainFile:
    p = resolve_path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise StageError("parse", EXIT_PARSE, f"cannot read {path}: {exc}") from None
    try:
        return parse_domain(text, filename=str(path), default_bounds=default_bounds,
                            check_durations=check_durations)
    except DslError as exc:
        raise StageError("parse", EXIT_PARSE, str(exc)) from None


def load_problem(path: str) -> ProblemFile:
    p = resolve_path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise StageError("parse", EXIT_PARSE, f"cannot read {path}: {exc}") from None
    try:
        return parse_problem(text, filename=str(path))
    except DslError as exc:
        raise StageError("parse", EXIT_PARSE, str(exc)) from None


def plan_document(p: TotalOrderPlan, domain: DomainFile, domain_path: str, problem_path: str,
                  goal_mode: str) -> dict:
    return {
        "domain": str(resolve_path(domain_path).resolve()),
        "problem": str(resolve_path(problem_path).resolve()),
        "goal_mode": goal_mode,
        "steps": plan_to_json(p, domain.durations),
    }


def order_plan(p: TotalOrderPlan, domain: DomainFile) -> Stn:
    return build_stn(p, last_achievers(p, achievers(p)), domain.durations)


def _describe_cycle(stn: Stn, witness) -> str:
    return " -> ".join(f"{stn.labels[e.src]}[{e.weight}]" for e in witness)


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    domain = load_domain(cfg.domain, cfg.default_bounds, cfg.check_durations)
    problem = load_problem(cfg.problem)
    search = SearchConfig(max_depth=cfg.max_depth, goal_mode=cfg.goal_mode)
    stats = SearchStats()
    plans = iter_plans(problem.init, problem.goal, problem.kb, domain, search, stats)
    diagnostics: list = []
    chosen = None
    attempt = 0
    for attempt in range(1, cfg.replan_attempts + 1):
        try:
            p = next(plans)
        except NoPlan as exc:
            if attempt == 1:
                raise StageError("plan", EXIT_NO_PLAN, str(exc)) from None
            diagnostics.append(f"search exhausted after {attempt - 1} plan(s)")
            break
        validate(p, domain, cfg.goal_mode)
        stn = order_plan(p, domain)
        verdict = check_consistency(stn)
        if verdict:
            chosen = (p, stn)
            break
        msg = f"attempt {attempt}: temporal network inconsistent; cycle {_describe_cycle(stn, verdict.witness)}"
        LOGGER.warning(msg)
        diagnostics.append(msg)
    if chosen is None:
        inverted = domain.durations.inverted()
        hint = f"; duration bounds with lower > upper: {', '.join(inverted)}" if inverted else ""
        raise StageError("stn", EXIT_INCONSISTENT,
                         f"no consistent plan after {attempt} attempt(s); review the knowledge base "
                         f"(action conditions and duration bounds){hint}\n" + "\n".join(diagnostics))
    p, stn = chosen
    schedule = minimize_makespan(stn)
    tree = btmod.build_bt(stn, p)
    sim = simulate(tree, problem.init, problem.goal, domain.durations, cfg.trials, cfg.seed, cfg.goal_mode)
    result = PipelineResult(p, stn, schedule, tree, sim, attempt, diagnostics)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "plan.json", plan_document(p, domain, cfg.domain, cfg.problem, cfg.goal_mode))
        (out / "stn.dot").write_text(stn_to_dot(stn), encoding="utf-8")
        write_json(out / "stn.json", stn_to_json(stn))
        write_json(out / "schedule.json", schedule_to_json(schedule))
        (out / "bt.xml").write_text(btmod.serialize_xml(tree), encoding="utf-8")
        (out / "bt.dot").write_text(btmod.bt_to_dot(tree), encoding="utf-8")
        write_json(out / "sim.json", sim.to_json())
        result.artifacts = [str(out / name) for name in ARTIFACTS]
    return result
