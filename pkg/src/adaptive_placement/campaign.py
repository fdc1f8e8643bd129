"""
Closed-loop campaigns: plan, simulate, enhance, re-plan.

Each mode replays the same rounds against the same world:

    bestfit         best-fit packing every round, no feedback
    solver-only     one exact solve, kept unchanged for every round
    solver+energy   re-solve each round with energy constraints
    solver+failure  re-solve each round with failure constraints
    full-freeda     re-solve each round with both, harmonized

The simulator always runs the WORLD specifications (scenarios on top). The
solver sees the PLANNER specifications, which the enhancers revise after
every round: observed flavour power, aggregated carbon intensities and
nodes that went offline.

Example:
    >>> config = load_campaign("configs/campaign.yaml")
    >>> result = run_campaign(config)
    >>> result.metrics.groupby("mode")["co2_g"].mean()
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

import pandas as pd

from adaptive_placement.charts import charts_available, write_charts
from adaptive_placement.config import (
    application_from_dict,
    dump_yaml_document,
    infrastructure_from_dict,
    load_application,
    load_infrastructure,
    load_yaml_document,
)
from adaptive_placement.energy import (
    EnergyThresholds,
    KnowledgeBase,
    energy_candidates,
    estimate_round,
    save_knowledge_base,
    update_knowledge,
    weigh,
)
from adaptive_placement.errors import NoDeploymentError, SpecError
from adaptive_placement.exporters import (
    emit_constraints,
    emit_dropped,
    metrics_frame,
    save_deployment,
    read_metrics_csv,
    write_metrics_csv,
)
from adaptive_placement.facts import RoundTrace
from adaptive_placement.failure import suggest
from adaptive_placement.harmonizer import Priority, harmonize
from adaptive_placement.model import ApplicationSpec, Deployment, InfrastructureSpec, SoftConstraint
from adaptive_placement.presets import PRESETS
from adaptive_placement.simulator import (
    ScenarioLibrary,
    UpdatePolicy,
    library_from_dict,
    library_to_dict,
    run_round,
    write_simulation_log,
)
from adaptive_placement.solver import DEFAULT_TIME_LIMIT
from adaptive_placement.strategies import BestFitStrategy, PlacementStrategy, SolverStrategy

logger = logging.getLogger(__name__)

# =============================================================================
# Modes
# =============================================================================


class Mode(str, Enum):
    BESTFIT = "bestfit"
    SOLVER_ONLY = "solver-only"
    SOLVER_ENERGY = "solver+energy"
    SOLVER_FAILURE = "solver+failure"
    FULL = "full-freeda"

    @property
    def uses_failure(self) -> bool:
        return self in (Mode.SOLVER_FAILURE, Mode.FULL)

    @property
    def uses_energy(self) -> bool:
        return self in (Mode.SOLVER_ENERGY, Mode.FULL)

    @property
    def replans(self) -> bool:
        return self not in (Mode.BESTFIT, Mode.SOLVER_ONLY)

    @property
    def slug(self) -> str:
        return self.value.replace("+", "_")


def parse_mode(value: str) -> Mode:
    try:
        return Mode(value)
    except ValueError:
        valid = ", ".join(m.value for m in Mode)
        raise ValueError(f"unknown mode '{value}'; valid modes: {valid}") from None


# =============================================================================
# Configuration
# =============================================================================


@dataclass
class CampaignConfig:
    """
    Everything a campaign run needs.

    Attributes:
        name: Campaign label.
        application: Application spec file or preset name.
        infrastructure: Infrastructure spec file or preset name.
        modes: Modes to run, in report order.
        rounds: Rounds per mode.
        ticks: Ticks per round.
        tick_minutes: Duration of one tick.
        seed: Recorded in every simulation log.
        priority: Harmonizer priority for the full loop.
        time_limit: Solver wall-clock limit per solve, in seconds.
        max_drop_k: Largest relaxation drop-set; None for all.
        thresholds: Energy thresholds in gCO2 per round.
        top_k: Energy constraint list length.
        carbon_window: Intensity samples averaged per node.
        scenarios: Named scenario library.
        update_policy: Scenario names per round.
        output_dir: Where artifacts go; None keeps everything in memory.
        charts: Render SVG charts of the metrics.
        base_dir: Directory relative spec paths are resolved against.
    """

    name: str = "campaign"
    application: str = "application"
    infrastructure: str = "infrastructure"
    modes: list[Mode] = field(default_factory=lambda: list(Mode))
    rounds: int = 6
    ticks: int = 120
    tick_minutes: float = 1.0
    seed: int = 0
    priority: Priority = Priority.FAILURE
    time_limit: float = DEFAULT_TIME_LIMIT
    max_drop_k: int | None = None
    thresholds: EnergyThresholds = field(default_factory=EnergyThresholds)
    top_k: int = 10
    carbon_window: int = 30
    scenarios: ScenarioLibrary = field(default_factory=dict)
    update_policy: UpdatePolicy | None = None
    output_dir: str | None = None
    charts: bool = False
    base_dir: Path = field(default_factory=Path.cwd, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.ticks < 1:
            raise ValueError(f"ticks must be >= 1, got {self.ticks}")
        if self.tick_minutes <= 0:
            raise ValueError(f"tick_minutes must be positive, got {self.tick_minutes}")
        if self.time_limit <= 0:
            raise ValueError(f"time_limit must be positive, got {self.time_limit}")
        if self.max_drop_k is not None and self.max_drop_k < 0:
            raise ValueError(f"max_drop_k must be >= 0, got {self.max_drop_k}")
        if not self.modes:
            raise ValueError("modes must name at least one mode")
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("modes must not repeat")
        if self.update_policy is None:
            empty = tuple(() for _ in range(self.rounds))
            self.update_policy = UpdatePolicy(empty, empty)
        self.update_policy.check(self.rounds, self.scenarios)

    @property
    def horizon_hours(self) -> float:
        return self.ticks * self.tick_minutes / 60.0

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: Path | None = None) -> CampaignConfig:
        """
        Build a config from its file form.

        Raises:
            ValueError: On unknown modes or priorities and on invalid values.
        """
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown campaign field(s): {', '.join(unknown)}")

        kwargs: dict[str, Any] = dict(data)
        if "modes" in data:
            kwargs["modes"] = [parse_mode(str(m)) for m in data["modes"]]
        if "priority" in data:
            try:
                kwargs["priority"] = Priority(str(data["priority"]))
            except ValueError:
                valid = ", ".join(p.value for p in Priority)
                raise ValueError(f"unknown priority '{data['priority']}'; valid: {valid}") from None
        if "thresholds" in data:
            kwargs["thresholds"] = EnergyThresholds(**data["thresholds"])
        if "scenarios" in data:
            kwargs["scenarios"] = library_from_dict(data["scenarios"] or {})
        if "update_policy" in data:
            kwargs["update_policy"] = UpdatePolicy.from_dict(data["update_policy"] or {})
        if base_dir is not None:
            kwargs["base_dir"] = base_dir
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        assert self.update_policy is not None
        return {
            "name": self.name,
            "application": self.application,
            "infrastructure": self.infrastructure,
            "modes": [m.value for m in self.modes],
            "rounds": self.rounds,
            "ticks": self.ticks,
            "tick_minutes": self.tick_minutes,
            "seed": self.seed,
            "priority": self.priority.value,
            "time_limit": self.time_limit,
            "max_drop_k": self.max_drop_k,
            "thresholds": {
                "service_gco2": self.thresholds.service_gco2,
                "connection_gco2": self.thresholds.connection_gco2,
            },
            "top_k": self.top_k,
            "carbon_window": self.carbon_window,
            "scenarios": library_to_dict(self.scenarios),
            "update_policy": self.update_policy.to_dict(),
            "output_dir": self.output_dir,
            "charts": self.charts,
        }

    def load_specs(self) -> tuple[ApplicationSpec, InfrastructureSpec]:
        """
        Resolve the application and infrastructure references.

        A reference naming a preset loads the preset; anything else is a path
        relative to ``base_dir``.
        """
        return (
            resolve_application(self.application, self.base_dir),
            resolve_infrastructure(self.infrastructure, self.base_dir),
        )


def resolve_application(reference: str, base_dir: Path | None = None) -> ApplicationSpec:
    """Load a preset by name, or else the file at ``reference``."""
    if reference in PRESETS and "app" in PRESETS[reference]:
        return application_from_dict(PRESETS[reference]["app"])
    return load_application((base_dir or Path.cwd()) / reference)


def resolve_infrastructure(reference: str, base_dir: Path | None = None) -> InfrastructureSpec:
    if reference in PRESETS and "infra" in PRESETS[reference]:
        return infrastructure_from_dict(PRESETS[reference]["infra"])
    return load_infrastructure((base_dir or Path.cwd()) / reference)


def load_campaign(filepath: str | Path) -> CampaignConfig:
    """
    Load a campaign config from YAML; relative spec paths resolve against the
    file's directory.

    Raises:
        FileNotFoundError: If the file doesn't exist.
        SpecError: On YAML syntax errors.
        ValueError: On invalid fields.
    """
    path = Path(filepath)
    document = load_yaml_document(path.read_text(encoding="utf-8"))
    if not isinstance(document, Mapping):
        raise SpecError("expected a mapping at the top level", path="")
    return CampaignConfig.from_dict(document, base_dir=path.resolve().parent)


def save_campaign(config: CampaignConfig, filepath: str | Path) -> None:
    Path(filepath).write_text(dump_yaml_document(config.to_dict()), encoding="utf-8")


# =============================================================================
# Reports
# =============================================================================


@dataclass
class RoundReport:
    """What happened in one round of one mode."""

    round_index: int
    mode: Mode
    deployment: Deployment
    changes: int
    trace: RoundTrace
    failure_constraints: list[SoftConstraint] = field(default_factory=list)
    energy_constraints: list[SoftConstraint] = field(default_factory=list)
    next_constraints: list[SoftConstraint] = field(default_factory=list)
    dropped: list[tuple[SoftConstraint, str]] = field(default_factory=list)

    def metrics_row(self) -> dict[str, Any]:
        metrics = self.trace.metrics
        return {
            "round": self.round_index,
            "mode": self.mode.value,
            "downtime_pct": metrics.downtime_pct,
            "app_quality_pct": metrics.app_quality_pct,
            "energy_kwh": metrics.energy_kwh,
            "co2_g": metrics.co2_g,
            "changes": self.changes,
        }


@dataclass
class ModeReport:
    mode: Mode
    rounds: list[RoundReport] = field(default_factory=list)
    halted: str | None = None


@dataclass
class CampaignResult:
    config: CampaignConfig
    reports: dict[Mode, ModeReport]

    @property
    def metrics(self) -> pd.DataFrame:
        """One row per (mode, round), modes in config order."""
        return metrics_frame(
            report.metrics_row()
            for mode in self.config.modes
            for report in self.reports[mode].rounds
        )

    @property
    def halted(self) -> dict[Mode, str]:
        return {mode: r.halted for mode, r in self.reports.items() if r.halted is not None}

    def summary(self) -> pd.DataFrame:
        """Mean metrics per mode."""
        frame = self.metrics
        if frame.empty:
            return frame
        columns = ["downtime_pct", "app_quality_pct", "energy_kwh", "co2_g", "changes"]
        order = [m.value for m in self.config.modes if m.value in set(frame["mode"])]
        return frame.groupby("mode", sort=False)[columns].mean().reindex(order)


# =============================================================================
# Runner
# =============================================================================


class CampaignRunner:
    """
    Runs every configured mode over the same world.

    Modes share nothing mutable; each starts from the loaded specs and an
    empty knowledge base.
    """

    def __init__(self, config: CampaignConfig) -> None:
        self.config = config
        self.world_app, self.world_infra = config.load_specs()

    def run(self, output_dir: str | Path | None = None) -> CampaignResult:
        """
        Run all modes, writing artifacts when an output directory is given.

        Layout: ``<out>/metrics.csv`` and ``<out>/<mode>/round_<r>/`` with
        ``simulation.log``, ``deployment.txt``, ``failure.constraints``,
        ``energy.constraints``, ``constraints.txt`` and ``dropped.txt``.
        """
        target = output_dir if output_dir is not None else self.config.output_dir
        out = Path(target) if target is not None else None
        reports = {}
        for mode in self.config.modes:
            logger.info("campaign '%s': running mode %s", self.config.name, mode.value)
            reports[mode] = self.run_mode(mode, out / mode.slug if out is not None else None)

        result = CampaignResult(self.config, reports)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            write_metrics_csv(result.metrics, out / "metrics.csv")
            if self.config.charts:
                if charts_available():
                    write_charts(read_metrics_csv(out / "metrics.csv"), out)
                else:
                    logger.warning("matplotlib is not installed; skipping charts")
        return result

    def _strategy(self, mode: Mode) -> PlacementStrategy:
        if mode is Mode.BESTFIT:
            return BestFitStrategy()
        return SolverStrategy(
            time_limit=self.config.time_limit,
            max_drop_k=self.config.max_drop_k,
            horizon_hours=self.config.horizon_hours,
        )

    def run_mode(self, mode: Mode, out: Path | None = None) -> ModeReport:
        config = self.config
        assert config.update_policy is not None
        report = ModeReport(mode)
        strategy = self._strategy(mode)
        planner_app, planner_infra = self.world_app, self.world_infra
        kb = KnowledgeBase(top_k=config.top_k, carbon_window=config.carbon_window)
        offline: set[str] = set()
        previous: Deployment | None = None
        soft: list[SoftConstraint] = []

        for r in range(config.rounds):
            try:
                if mode is Mode.SOLVER_ONLY and previous is not None:
                    deployment = previous
                elif mode.replans:
                    deployment = strategy.place(planner_app, planner_infra, previous, soft)
                else:
                    deployment = strategy.place(planner_app, planner_infra)
            except NoDeploymentError as exc:
                report.halted = f"no satisfactory deployment in round {r}: {exc}"
                logger.warning("mode %s halted: %s", mode.value, report.halted)
                if out is not None:
                    out.mkdir(parents=True, exist_ok=True)
                    (out / "halted.txt").write_text(report.halted + "\n", encoding="utf-8")
                break

            scenarios = config.update_policy.scenarios_for(r, config.scenarios)
            trace = run_round(
                deployment,
                self.world_app,
                self.world_infra,
                scenarios,
                ticks=config.ticks,
                seed=config.seed,
                tick_minutes=config.tick_minutes,
            )
            changes = deployment.changes_from(previous) if previous is not None else 0
            current = RoundReport(r, mode, deployment, changes, trace)
            if isinstance(strategy, SolverStrategy):
                current.dropped = [(c, "relaxed to reach a deployment") for c in strategy.last_dropped]

            if mode.uses_failure:
                current.failure_constraints = sorted(suggest(trace.facts), key=lambda c: c.to_text())
                offline |= trace.facts.disconnected_nodes()
                planner_infra = planner_infra.with_unavailable(offline)
            if mode.uses_energy:
                kb = update_knowledge(kb, estimate_round(trace, planner_infra, kb.carbon_window), None)
                candidates = energy_candidates(
                    kb, planner_app, planner_infra, deployment, config.thresholds, config.horizon_hours
                )
                fresh = weigh(candidates, kb.top_k)
                impacts = {c.constraint.identity: c.impact_g for c in candidates}
                kb = update_knowledge(kb, None, fresh, impacts)
                current.energy_constraints = kb.retrieve(fresh)
                planner_app = self.world_app.with_energy_profiles(kb.flavour_power())
                planner_infra = planner_infra.with_carbon_intensities(
                    {n: kb.node_intensity(n, planner_infra) for n in planner_infra.node_names}
                )
            if mode.replans:
                soft, harmonized_out = harmonize(
                    current.failure_constraints, current.energy_constraints, config.priority
                )
                current.next_constraints = soft
                current.dropped = current.dropped + harmonized_out

            report.rounds.append(current)
            logger.info(
                "mode %s round %d: %d change(s), downtime %.2f%%, %.3f gCO2",
                mode.value,
                r,
                changes,
                trace.metrics.downtime_pct,
                trace.metrics.co2_g,
            )
            if out is not None:
                _write_round(current, out / f"round_{r}")
            previous = deployment

        if out is not None and mode.uses_energy:
            out.mkdir(parents=True, exist_ok=True)
            save_knowledge_base(kb, out / "knowledge_base.json")
        return report


def _write_round(report: RoundReport, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_simulation_log(report.trace, directory / "simulation.log")
    save_deployment(report.deployment, directory / "deployment.txt")
    (directory / "failure.constraints").write_text(
        emit_constraints(report.failure_constraints), encoding="utf-8"
    )
    (directory / "energy.constraints").write_text(
        emit_constraints(report.energy_constraints), encoding="utf-8"
    )
    (directory / "constraints.txt").write_text(emit_constraints(report.next_constraints), encoding="utf-8")
    (directory / "dropped.txt").write_text(emit_dropped(report.dropped), encoding="utf-8")


def run_campaign(config: CampaignConfig, output_dir: str | Path | None = None) -> CampaignResult:
    """
    Run a campaign.

    Args:
        config: Campaign configuration.
        output_dir: Overrides ``config.output_dir``.

    Returns:
        CampaignResult with per-round reports and the metrics table. A mode
        whose solve fails after relaxation stops early and carries a
        "no satisfactory deployment" message in ``halted``.
    """
    return CampaignRunner(config).run(output_dir)
