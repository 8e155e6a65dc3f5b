"""Command-line entry point (``tempoplan``)."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import bt as btmod
from .dsl import DslError
from .llm import (LiveTransport, PromptSpec, ReplayTransport, TransportError, build_prompt,
                  parse_go_clauses, parse_response, validate_testcase)
from .pipeline import (EXIT_INCONSISTENT, EXIT_NO_PLAN, EXIT_OTHER, EXIT_PARSE, EXIT_SIM,
                       PipelineConfig, StageError, load_domain, load_problem, order_plan,
                       plan_document, resolve_path, run_pipeline, write_json)
from .planner import NoPlan, PlanViolation, SearchConfig, plan, plan_from_json
from .simulate import simulate
from .stn import (check_consistency, minimize_makespan, schedule_to_json, stn_from_json,
                  stn_to_dot, stn_to_json)

LOGGER = logging.getLogger(__name__)

CONFIG_KEYS = {"domain", "problem", "max_depth", "goal_mode", "default_bounds",
               "replan_attempts", "out", "seed", "trials"}


def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def _bounds(text: str) -> tuple:
    lo, hi = (Fraction(x.strip()) for x in text.split(","))
    return lo, hi


def _emit(text: str, dest):
    if dest:
        Path(dest).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_plan(path: str, domain_override=None, problem_override=None):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    domain = load_domain(domain_override or doc["domain"], check_durations=False)
    problem = load_problem(problem_override or doc["problem"])
    p = plan_from_json(doc["steps"], problem.init, problem.goal, problem.kb, domain)
    return p, domain, problem


# -- subcommands ---------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = PipelineConfig(args.domain, args.problem, max_depth=args.max_depth, goal_mode=args.goal_mode,
                         default_bounds=_bounds(args.default_bounds),
                         replan_attempts=args.replan_attempts, out_dir=args.out,
                         seed=args.seed, trials=args.trials)
    res = run_pipeline(cfg)
    print(f"plan: {len(res.plan)} steps (attempt {res.attempts})")
    for name in res.plan.names():
        print(f"  {name}")
    print(f"makespan: {res.schedule.makespan}")
    print(f"simulation: {res.sim.successes}/{res.sim.trials} runs reached the goal")
    for path in res.artifacts:
        print(f"wrote {path}")
    if res.sim.successes < res.sim.trials:
        first = res.sim.failures[0]
        print(f"[simulate] failure at {first.location} ({first.node}): {first.message}", file=sys.stderr)
        return EXIT_SIM
    return 0


def cmd_plan(args) -> int:
    domain = load_domain(args.domain, _bounds(args.default_bounds), check_durations=False)
    problem = load_problem(args.problem)
    p = plan(problem.init, problem.goal, problem.kb, domain,
             SearchConfig(max_depth=args.max_depth, goal_mode=args.goal_mode))
    doc = plan_document(p, domain, args.domain, args.problem, args.goal_mode)
    _emit(json.dumps(doc, indent=2) + "\n", args.json)
    return 0


def cmd_stn(args) -> int:
    p, domain, _ = _load_plan(args.plan, args.domain, args.problem)
    stn = order_plan(p, domain)
    if args.json:
        write_json(Path(args.json), stn_to_json(stn))
    if args.dot:
        Path(args.dot).write_text(stn_to_dot(stn), encoding="utf-8")
    verdict = check_consistency(stn)
    if not verdict:
        cycle = ", ".join(f"{e.src}->{e.dst} ({e.weight})" for e in verdict.witness)
        print(f"[stn] inconsistent: negative cycle {cycle}", file=sys.stderr)
        return EXIT_INCONSISTENT
    if not args.json and not args.dot:
        sys.stdout.write(json.dumps(stn_to_json(stn), indent=2) + "\n")
    return 0


def cmd_schedule(args) -> int:
    stn = stn_from_json(json.loads(Path(args.stn).read_text(encoding="utf-8")))
    verdict = check_consistency(stn)
    if not verdict:
        print("[schedule] temporal network is inconsistent", file=sys.stderr)
        return EXIT_INCONSISTENT
    sched = minimize_makespan(stn)
    _emit(json.dumps(schedule_to_json(sched), indent=2) + "\n", args.json)
    return 0


def cmd_bt(args) -> int:
    p, domain, _ = _load_plan(args.plan, args.domain, args.problem)
    stn = order_plan(p, domain)
    if not check_consistency(stn):
        print("[bt] temporal network is inconsistent", file=sys.stderr)
        return EXIT_INCONSISTENT
    tree = btmod.build_bt(stn, p)
    if args.dot:
        Path(args.dot).write_text(btmod.bt_to_dot(tree), encoding="utf-8")
    _emit(btmod.serialize_xml(tree), args.xml)
    return 0


def cmd_simulate(args) -> int:
    try:
        tree = btmod.parse_xml(Path(args.bt).read_text(encoding="utf-8"))
    except btmod.BtFormatError as exc:
        raise StageError("parse", EXIT_PARSE, f"{args.bt}: {exc}") from None
    domain = load_domain(args.domain, check_durations=False)
    problem = load_problem(args.problem)
    rep = simulate(tree, problem.init, problem.goal, domain.durations, args.trials, args.seed, args.goal_mode)
    _emit(json.dumps(rep.to_json(), indent=2) + "\n", args.json)
    return 0 if rep.successes == rep.trials else EXIT_SIM


def cmd_validate_llm(args) -> int:
    text = Path(args.response).read_text(encoding="utf-8")
    parsed = parse_response(text)
    reference = None
    if args.reference:
        refs = parse_go_clauses(resolve_path(args.reference).read_text(encoding="utf-8"))
        if args.reference_name:
            refs = [r for r in refs if r.name == args.reference_name]
        if not refs:
            raise StageError("validate", EXIT_OTHER, "reference test case not found")
        reference = refs[0]
    rep = validate_testcase(parsed.testcase, reference=reference)
    doc = rep.to_json()
    doc["warnings"] = parsed.warnings
    print(json.dumps(doc, indent=2))
    return 0 if rep.success else EXIT_OTHER


def cmd_prompt(args) -> int:
    examples = parse_go_clauses(resolve_path(args.examples).read_text(encoding="utf-8"), args.examples)
    prompt = build_prompt(PromptSpec(tuple(examples), args.task or ""))
    if args.llm is None:
        _emit(prompt, args.out)
        return 0
    if args.llm == "offline":
        transport = ReplayTransport(args.replay_dir)
    else:
        if not args.endpoint:
            raise StageError("prompt", EXIT_OTHER, "--llm live needs --endpoint")
        transport = LiveTransport(args.endpoint, args.model, args.api_key_env)
    try:
        answer = transport.complete(prompt)
    except TransportError as exc:
        raise StageError("llm", EXIT_OTHER, str(exc)) from None
    _emit(answer, args.out)
    return 0


# -- argument parsing ------------------------------------------------------------

def _search_flags(sp, defaults: dict):
    sp.add_argument("--max-depth", type=int, default=int(defaults.get("max_depth", 30)))
    sp.add_argument("--goal-mode", choices=("equality", "subset"),
                    default=defaults.get("goal_mode", "equality"))
    sp.add_argument("--default-bounds", default=defaults.get("default_bounds", "1,10"),
                    help="duration bounds for unlisted actions, as LOW,HIGH")


def build_parser(defaults=None) -> argparse.ArgumentParser:
    d = defaults or {}
    ap = argparse.ArgumentParser(prog="tempoplan", description="Temporal planning to behavior trees.")
    ap.add_argument("--config", help="key = value file; flags override it")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def files_flags(sp, required=True):
        sp.add_argument("--domain", required=required and "domain" not in d, default=d.get("domain"))
        sp.add_argument("--problem", required=required and "problem" not in d, default=d.get("problem"))

    sp = sub.add_parser("run", help="full pipeline")
    files_flags(sp)
    _search_flags(sp, d)
    sp.add_argument("--replan-attempts", type=int, default=int(d.get("replan_attempts", 5)))
    sp.add_argument("--out", default=d.get("out", "out"))
    sp.add_argument("--seed", type=int, default=int(d.get("seed", 0)))
    sp.add_argument("--trials", type=int, default=int(d.get("trials", 100)))
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("plan", help="search for a total-order plan")
    files_flags(sp)
    _search_flags(sp, d)
    sp.add_argument("--json", help="output file (default: stdout)")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("stn", help="temporal network of a plan")
    sp.add_argument("--plan", required=True)
    files_flags(sp, required=False)
    sp.add_argument("--json")
    sp.add_argument("--dot")
    sp.set_defaults(func=cmd_stn)

    sp = sub.add_parser("schedule", help="makespan-minimal schedule of an STN")
    sp.add_argument("--stn", required=True)
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_schedule)

    sp = sub.add_parser("bt", help="behavior tree of a plan")
    sp.add_argument("--plan", required=True)
    files_flags(sp, required=False)
    sp.add_argument("--xml")
    sp.add_argument("--dot")
    sp.set_defaults(func=cmd_bt)

    sp = sub.add_parser("simulate", help="run a behavior tree on a virtual clock")
    sp.add_argument("--bt", required=True)
    files_flags(sp)
    sp.add_argument("--goal-mode", choices=("equality", "subset"), default=d.get("goal_mode", "equality"))
    sp.add_argument("--trials", type=int, default=int(d.get("trials", 100)))
    sp.add_argument("--seed", type=int, default=int(d.get("seed", 0)))
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("validate-llm", help="check a model response")
    sp.add_argument("--response", required=True)
    sp.add_argument("--reference", help="file of go(...) clauses")
    sp.add_argument("--reference-name")
    sp.set_defaults(func=cmd_validate_llm)

    sp = sub.add_parser("prompt", help="build (and optionally send) a test-case prompt")
    sp.add_argument("--examples", required=True)
    sp.add_argument("--task", default="")
    sp.add_argument("--out")
    sp.add_argument("--llm", choices=("offline", "live"))
    sp.add_argument("--replay-dir", default="replays")
    sp.add_argument("--endpoint")
    sp.add_argument("--model", default="")
    sp.add_argument("--api-key-env", default="TEMPOPLAN_LLM_KEY")
    sp.set_defaults(func=cmd_prompt)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        defaults = read_config(known.config) if known.config else {}
    except (OSError, ValueError) as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return EXIT_OTHER
    args = build_parser(defaults).parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except DslError as exc:
        print(f"[parse] {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NoPlan as exc:
        print(f"[plan] {exc}", file=sys.stderr)
        return EXIT_NO_PLAN
    except PlanViolation as exc:
        print(f"[validate] {exc}", file=sys.stderr)
        return EXIT_OTHER
    except (OSError, ValueError, KeyError) as exc:
        print(f"[error] {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
