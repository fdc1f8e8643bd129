#!/usr/bin/env python3
"""
Command-line interface for adaptive-placement.

Usage:
    adaptive-placement solve --app=application.yaml --infra=infrastructure.yaml
    adaptive-placement enhance --log=simulation.log --app=... --infra=... --kb=kb.json
    adaptive-placement harmonize --failure=failure.constraints --energy=energy.constraints
    adaptive-placement simulate --app=... --infra=... --deployment=deployment.txt
    adaptive-placement campaign configs/campaign.yaml
    adaptive-placement oracle --app=... --infra=...
    adaptive-placement preset campaign > campaign.yaml

Exit codes: 0 ok, 1 input error, 2 unsatisfiable, 3 time limit reached.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from adaptive_placement import __version__
from adaptive_placement.campaign import load_campaign, resolve_application, resolve_infrastructure, run_campaign
from adaptive_placement.config import dump_yaml_document, load_yaml_document, save_application, save_infrastructure
from adaptive_placement.energy import (
    EnergyThresholds,
    energy_candidates,
    estimate_round,
    load_knowledge_base,
    save_knowledge_base,
    update_knowledge,
    weigh,
)
from adaptive_placement.errors import PlacementError
from adaptive_placement.exporters import (
    dump_model,
    emit_constraints,
    emit_deployment,
    emit_dropped,
    format_metrics_csv,
    load_constraints,
    load_deployment,
    metrics_frame,
    save_deployment,
)
from adaptive_placement.facts import trace_from_log
from adaptive_placement.failure import suggest
from adaptive_placement.harmonizer import Priority, harmonize
from adaptive_placement.model import Provenance, SoftConstraint
from adaptive_placement.presets import PRESETS, get_preset_names
from adaptive_placement.simulator import Scenario, library_from_dict, run_round, write_simulation_log
from adaptive_placement.solver import (
    DEFAULT_TIME_LIMIT,
    ObjectiveMode,
    PlacementProblem,
    SolveStatus,
    brute_force_oracle,
    solve,
    solve_with_relaxation,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNSAT = 2
EXIT_TIMEOUT = 3

OBJECTIVES = {
    "first": ObjectiveMode.MAXIMIZE_IMPORTANCE,
    "redeploy": ObjectiveMode.MINIMIZE_CHANGES,
}


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(
        prog="adaptive-placement",
        description="Plan, simulate and adapt application deployments on Cloud-Edge infrastructure",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    # Solve the built-in case study
    %(prog)s solve --app=application --infra=infrastructure --output-dir=out

    # Re-solve with suggested constraints, keeping as much as possible
    %(prog)s solve --app=app.yaml --infra=infra.yaml \\
        --constraints=failure.constraints --previous=out/deployment.txt

    # Run every mode of a campaign
    %(prog)s campaign configs/campaign.yaml --output-dir=results --charts
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--verbose", "-v", action="count", default=0, help="Log progress (-vv for debug output)"
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add_specs(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--app", required=True, metavar="FILE", help="Application spec (or preset name)")
        sub.add_argument("--infra", required=True, metavar="FILE", help="Infrastructure spec (or preset name)")

    def add_output(sub: argparse.ArgumentParser) -> None:
        sub.add_argument(
            "--output-dir", "-o", default=".", metavar="DIR", help="Directory for written files (default: .)"
        )

    solve_cmd = commands.add_parser("solve", help="Compute an optimal deployment")
    add_specs(solve_cmd)
    solve_cmd.add_argument(
        "--constraints", action="append", default=[], metavar="FILE", help="Soft constraint file (repeatable)"
    )
    solve_cmd.add_argument("--previous", metavar="FILE", help="Previous deployment; minimise changes to it")
    solve_cmd.add_argument(
        "--objective",
        choices=list(OBJECTIVES),
        help="first: maximise importance; redeploy: minimise changes (default: redeploy with --previous)",
    )
    solve_cmd.add_argument("--time-limit", type=float, default=DEFAULT_TIME_LIMIT, metavar="SECONDS")
    solve_cmd.add_argument(
        "--max-drop-k", type=int, metavar="K", help="Largest number of soft constraints to relax"
    )
    solve_cmd.add_argument("--horizon-hours", type=float, default=2.0, metavar="HOURS")
    add_output(solve_cmd)

    enhance_cmd = commands.add_parser("enhance", help="Derive constraints from a simulation log")
    add_specs(enhance_cmd)
    enhance_cmd.add_argument("--log", required=True, metavar="FILE", help="Simulation log")
    enhance_cmd.add_argument("--kb", metavar="FILE", help="Knowledge base JSON, read and updated")
    enhance_cmd.add_argument("--tick-minutes", type=float, default=1.0, metavar="MIN")
    enhance_cmd.add_argument("--service-threshold", type=float, default=50.0, metavar="GCO2")
    enhance_cmd.add_argument("--connection-threshold", type=float, default=50.0, metavar="GCO2")
    add_output(enhance_cmd)

    harmonize_cmd = commands.add_parser("harmonize", help="Reconcile failure and energy constraints")
    harmonize_cmd.add_argument("--failure", metavar="FILE", help="Failure constraint file")
    harmonize_cmd.add_argument("--energy", metavar="FILE", help="Energy constraint file")
    harmonize_cmd.add_argument(
        "--priority", choices=[p.value for p in Priority], default=Priority.NONE.value
    )
    add_output(harmonize_cmd)

    simulate_cmd = commands.add_parser("simulate", help="Simulate one round of a deployment")
    add_specs(simulate_cmd)
    simulate_cmd.add_argument("--deployment", required=True, metavar="FILE")
    simulate_cmd.add_argument("--scenarios", metavar="FILE", help="Scenario library or list (YAML)")
    simulate_cmd.add_argument(
        "--scenario", action="append", default=[], metavar="NAME", help="Library entry to apply (repeatable)"
    )
    simulate_cmd.add_argument("--ticks", type=int, default=120)
    simulate_cmd.add_argument("--tick-minutes", type=float, default=1.0, metavar="MIN")
    simulate_cmd.add_argument("--seed", type=int, default=0)
    add_output(simulate_cmd)

    campaign_cmd = commands.add_parser("campaign", help="Run a closed-loop campaign")
    campaign_cmd.add_argument("config", metavar="CONFIG", help="Campaign YAML file")
    campaign_cmd.add_argument("--output-dir", "-o", metavar="DIR", help="Overrides the config's output_dir")
    campaign_cmd.add_argument("--charts", action="store_true", help="Also write SVG charts")

    oracle_cmd = commands.add_parser("oracle", help="Check the solver against exhaustive enumeration")
    add_specs(oracle_cmd)
    oracle_cmd.add_argument("--constraints", action="append", default=[], metavar="FILE")
    oracle_cmd.add_argument("--previous", metavar="FILE")
    oracle_cmd.add_argument("--limit", type=int, default=10**7, help="Largest candidate count")

    preset_cmd = commands.add_parser("preset", help="Print a built-in preset as YAML")
    preset_cmd.add_argument("name", nargs="?", metavar="NAME", help=f"One of: {', '.join(get_preset_names())}")

    return parser


# =============================================================================
# Helpers
# =============================================================================


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _read_constraints(paths: list[str], provenance: Provenance = Provenance.FAILURE) -> list[SoftConstraint]:
    constraints: list[SoftConstraint] = []
    for path in paths:
        constraints.extend(load_constraints(path, provenance))
    return constraints


def _problem(args: argparse.Namespace) -> tuple[PlacementProblem, list[SoftConstraint]]:
    app = resolve_application(args.app)
    infra = resolve_infrastructure(args.infra)
    previous = load_deployment(args.previous) if args.previous else None
    chosen = getattr(args, "objective", None) or ("redeploy" if previous is not None else "first")
    objective = OBJECTIVES[chosen]
    if objective is ObjectiveMode.MINIMIZE_CHANGES and previous is None:
        raise ValueError("--objective redeploy requires --previous")
    problem = PlacementProblem(
        app,
        infra,
        previous=previous,
        objective=objective,
        horizon_hours=getattr(args, "horizon_hours", 2.0),
    )
    return problem, _read_constraints(args.constraints)


# =============================================================================
# Commands
# =============================================================================


def cmd_solve(args: argparse.Namespace) -> int:
    problem, soft = _problem(args)
    outcome, dropped = solve_with_relaxation(problem, soft, args.time_limit, args.max_drop_k)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    enforced = [c for c in soft if c not in dropped]
    (out / "model.txt").write_text(dump_model(problem.with_soft(enforced)), encoding="utf-8")

    if outcome.status is SolveStatus.UNSATISFIABLE:
        print("Error: no satisfactory deployment exists", file=sys.stderr)
        return EXIT_UNSAT
    if outcome.deployment is not None:
        save_deployment(outcome.deployment, out / "deployment.txt")
        print(emit_deployment(outcome.deployment), end="")
    for constraint in dropped:
        print(f"dropped: {constraint.to_text()}")
    if outcome.status is SolveStatus.TIMED_OUT:
        print("Error: time limit reached before optimality was proven", file=sys.stderr)
        return EXIT_TIMEOUT
    print(f"objective: {outcome.objective_value} (importance {outcome.importance})")
    return EXIT_OK


def cmd_enhance(args: argparse.Namespace) -> int:
    app = resolve_application(args.app)
    infra = resolve_infrastructure(args.infra)
    trace = trace_from_log(Path(args.log).read_text(encoding="utf-8"), args.tick_minutes)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    failure_cs = sorted(suggest(trace.facts), key=lambda c: c.to_text())
    infra = infra.with_unavailable(trace.facts.disconnected_nodes())

    kb_path = Path(args.kb) if args.kb else out / "knowledge_base.json"
    kb = load_knowledge_base(kb_path)
    kb = update_knowledge(kb, estimate_round(trace, infra, kb.carbon_window), None)
    thresholds = EnergyThresholds(args.service_threshold, args.connection_threshold)
    horizon = max(trace.ticks, 1) * args.tick_minutes / 60.0
    candidates = energy_candidates(kb, app, infra, trace.deployment, thresholds, horizon)
    fresh = weigh(candidates, kb.top_k)
    kb = update_knowledge(kb, None, fresh, {c.constraint.identity: c.impact_g for c in candidates})
    energy_cs = kb.retrieve(fresh)

    (out / "failure.constraints").write_text(emit_constraints(failure_cs), encoding="utf-8")
    (out / "energy.constraints").write_text(emit_constraints(energy_cs), encoding="utf-8")
    save_knowledge_base(kb, kb_path)
    save_application(app.with_energy_profiles(kb.flavour_power()), out / "application.yaml")
    save_infrastructure(
        infra.with_carbon_intensities({n: kb.node_intensity(n, infra) for n in infra.node_names}),
        out / "infrastructure.yaml",
    )
    print(f"{len(failure_cs)} failure constraint(s), {len(energy_cs)} energy constraint(s)")
    return EXIT_OK


def cmd_harmonize(args: argparse.Namespace) -> int:
    failure_cs = _read_constraints([args.failure] if args.failure else [], Provenance.FAILURE)
    energy_cs = _read_constraints([args.energy] if args.energy else [], Provenance.ENERGY)
    kept, dropped = harmonize(failure_cs, energy_cs, Priority(args.priority))
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "constraints.txt").write_text(emit_constraints(kept), encoding="utf-8")
    (out / "dropped.txt").write_text(emit_dropped(dropped), encoding="utf-8")
    print(emit_constraints(kept), end="")
    return EXIT_OK


def _load_scenarios(path: str | None, names: list[str]) -> list[Scenario]:
    if path is None:
        if names:
            raise ValueError("--scenario needs --scenarios")
        return []
    document = load_yaml_document(Path(path).read_text(encoding="utf-8"))
    if isinstance(document, list):
        if names:
            raise ValueError("--scenario selects from a library, but the file holds a plain list")
        return [Scenario.from_dict(entry) for entry in document]
    library = library_from_dict(document or {})
    selected = names or list(library)
    missing = [name for name in selected if name not in library]
    if missing:
        raise ValueError(f"unknown scenario(s): {', '.join(missing)}")
    return [scenario for name in selected for scenario in library[name]]


def cmd_simulate(args: argparse.Namespace) -> int:
    app = resolve_application(args.app)
    infra = resolve_infrastructure(args.infra)
    deployment = load_deployment(args.deployment)
    scenarios = _load_scenarios(args.scenarios, args.scenario)
    trace = run_round(deployment, app, infra, scenarios, args.ticks, args.seed, args.tick_minutes)
    assert trace.metrics is not None

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_simulation_log(trace, out / "simulation.log")
    row = {
        "round": 0,
        "mode": "simulate",
        "downtime_pct": trace.metrics.downtime_pct,
        "app_quality_pct": trace.metrics.app_quality_pct,
        "energy_kwh": trace.metrics.energy_kwh,
        "co2_g": trace.metrics.co2_g,
        "changes": 0,
    }
    text = format_metrics_csv(metrics_frame([row]))
    (out / "metrics.csv").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_campaign(args: argparse.Namespace) -> int:
    config = load_campaign(args.config)
    if args.charts:
        config.charts = True
    result = run_campaign(config, args.output_dir)

    summary = result.summary()
    if not summary.empty:
        print(summary.to_string(float_format=lambda v: f"{v:.3f}"))
    for mode, message in result.halted.items():
        print(f"Error: {mode.value}: {message}", file=sys.stderr)
    return EXIT_UNSAT if result.halted else EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    problem, soft = _problem(args)
    problem = problem.with_soft(soft)
    expected = brute_force_oracle(problem, args.limit)
    actual = solve(problem)
    print(f"oracle: {expected.status.value} {expected.objective_value}")
    print(f"solver: {actual.status.value} {actual.objective_value}")
    if (expected.status, expected.objective_value) != (actual.status, actual.objective_value):
        print("Error: solver and oracle disagree", file=sys.stderr)
        return EXIT_INPUT
    print("agree")
    return EXIT_UNSAT if expected.status is SolveStatus.UNSATISFIABLE else EXIT_OK


def cmd_preset(args: argparse.Namespace) -> int:
    if args.name is None:
        print("Available presets:")
        print("-" * 50)
        for name in get_preset_names():
            print(f"  {name}")
        return EXIT_OK
    if args.name not in PRESETS:
        print(f"Error: Unknown preset '{args.name}'", file=sys.stderr)
        print(f"Available: {', '.join(get_preset_names())}", file=sys.stderr)
        return EXIT_INPUT
    print(dump_yaml_document(PRESETS[args.name]), end="")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "enhance": cmd_enhance,
    "harmonize": cmd_harmonize,
    "simulate": cmd_simulate,
    "campaign": cmd_campaign,
    "oracle": cmd_oracle,
    "preset": cmd_preset,
}


def main(argv: list[str] | None = None) -> int:
    """
    Main entry point for CLI.

    Args:
        argv: Command line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code (0 ok, 1 input error, 2 unsatisfiable, 3 time limit)
    """
    parser = create_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_INPUT
    _configure_logging(args.verbose)

    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as e:
        print(f"Error: File not found: {e.filename}", file=sys.stderr)
    except (PlacementError, ValueError, yaml.YAMLError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
