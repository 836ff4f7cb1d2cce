"""Command-line surface: run scenarios, plan and validate reconfigurations.

Verbs:
  run       execute a scenario script, write trace/series/figure files
  plan      search start -> goal, write and summarize the plan
  validate  replay a plan file against start and goal scenarios
  check     audit a world file: occupancy, joints, connectivity, power

Exit codes: 0 success, 1 protocol or plan failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import DEFAULT_CONFIG
from .planner import plan_reconfiguration, validate_plan
from .scenario import (
    Scenario,
    ScenarioError,
    load_plan,
    run_scenario,
    save_plan,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2


def _parse_overrides(pairs: list[str]) -> dict:
    """--set key=value pairs; values are JSON literals, bare words are strings."""
    overrides = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise ScenarioError(f"--set expects key=value, got {pair!r}")
        if not hasattr(DEFAULT_CONFIG, key):
            raise ScenarioError(f"unknown config key: {key}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        overrides[key] = value
    return overrides


def _load_scenario(path: str, overrides: dict) -> Scenario:
    scenario = Scenario.load(path)
    if overrides:
        try:
            scenario = replace(scenario, config=replace(scenario.config, **overrides))
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"bad config override: {e}") from None
    return scenario


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario, _parse_overrides(args.set))
    result = run_scenario(scenario, seed=args.seed)
    out_dir = Path(args.out)
    from .report import render_report  # defer matplotlib import to the verb that needs it

    written = render_report(result.trace, out_dir, scenario.config, plot=not args.no_plot)
    name = scenario.name or Path(args.scenario).stem
    print(f"run {name}: {'ok' if result.ok else 'FAILED'}")
    if not result.ok:
        print(f"  step {result.failed_step}: {result.reason}")
    joints = result.world.joints()
    print(f"  joints: {len(joints)}"
          + ("".join(f"\n    {j.male.addr} -> {j.female.addr}" for j in joints)))
    energized = sorted(result.world.propagate_power())
    print(f"  energized: {', '.join(energized) if energized else '(none)'}")
    print(f"  wrote {len(written)} files under {out_dir}/")
    return result.exit_code


def _cmd_plan(args: argparse.Namespace) -> int:
    overrides = _parse_overrides(args.set)
    start = _load_scenario(args.start, overrides).build_world()
    goal = _load_scenario(args.goal, overrides).build_world()
    result = plan_reconfiguration(start, goal, args.budget,
                                  exact_ids=args.exact_ids,
                                  arena_padding=args.arena_padding)
    if result.plan is None:
        why = "search space exhausted" if result.exhausted else "budget exhausted"
        print(f"plan: unsolved ({why}, {result.nodes_expanded} nodes)")
        return EXIT_FAILURE
    plan = result.plan
    print(f"plan: {plan.cost} actions ({result.nodes_expanded} nodes expanded)")
    for i, action in enumerate(plan.actions):
        print(f"  {i}: {action}")
    report = validate_plan(start, plan, goal, exact_ids=args.exact_ids)
    print(f"validation: {report}")
    if args.out:
        save_plan(plan, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK if report.valid else EXIT_FAILURE


def _cmd_validate(args: argparse.Namespace) -> int:
    overrides = _parse_overrides(args.set)
    start = _load_scenario(args.start, overrides).build_world()
    goal = _load_scenario(args.goal, overrides).build_world()
    plan = load_plan(args.plan)
    report = validate_plan(start, plan, goal, exact_ids=args.exact_ids)
    print(f"validation: {report}")
    return EXIT_OK if report.valid else EXIT_FAILURE


def _cmd_check(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario, _parse_overrides(args.set))
    world = scenario.build_world()
    occupancy_ok = all(
        world.occupancy.get(m.cell) == m.id for m in world.modules.values()
    ) and len(world.occupancy) == len(world.modules)
    joints = world.joints()
    report = world.connectivity_check()
    hard = world.unanchored_jointed()
    energized = sorted(world.propagate_power())
    print(f"check {scenario.name or Path(args.scenario).stem}:")
    print(f"  modules: {len(world.modules)}, joints: {len(joints)}")
    print(f"  occupancy: {'ok' if occupancy_ok else 'INCONSISTENT'}")
    print(f"  energized: {', '.join(energized) if energized else '(none)'}")
    if report.ok:
        print("  connectivity: ok")
    else:
        print(f"  connectivity: floating modules: {', '.join(report.floating)}")
    if hard:
        print(f"  anchor gate: VIOLATED by {', '.join(hard)}")
    ok = occupancy_ok and not hard
    return EXIT_OK if ok else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="couplesim",
        description="Deterministic simulator and planner for role-switching "
                    "lattice module connectors.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field (repeatable)")

    p_run = sub.add_parser("run", parents=[common], help="execute a scenario script")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default="out", help="output directory (default: out)")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the random-misalignment seed")
    p_run.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p_run.set_defaults(func=_cmd_run)

    p_plan = sub.add_parser("plan", parents=[common],
                            help="search for a reconfiguration plan")
    p_plan.add_argument("start")
    p_plan.add_argument("goal")
    p_plan.add_argument("--budget", type=int, default=50_000,
                        help="search node budget (default: 50000)")
    p_plan.add_argument("--out", default=None, help="write the plan file here")
    p_plan.add_argument("--exact-ids", action="store_true",
                        help="match module identities, not just shape")
    p_plan.add_argument("--arena-padding", type=int, default=1,
                        help="cells of slack around the start/goal bounding box")
    p_plan.set_defaults(func=_cmd_plan)

    p_val = sub.add_parser("validate", parents=[common],
                           help="replay a plan file against start and goal")
    p_val.add_argument("start")
    p_val.add_argument("plan")
    p_val.add_argument("goal")
    p_val.add_argument("--exact-ids", action="store_true")
    p_val.set_defaults(func=_cmd_validate)

    p_check = sub.add_parser("check", parents=[common],
                             help="audit a world file's invariants")
    p_check.add_argument("scenario")
    p_check.set_defaults(func=_cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
