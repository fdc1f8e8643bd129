"""
Discrete-tick simulation of one deployed round.

A round is a fixed number of ticks. Scenarios add a per-tick delta to one
quantity of the infrastructure or the application:

    node resource         effective capacity (floored at 0)
    node carbon_intensity effective intensity (floored at 0)
    node network          baseline 1.0; <= 0 means the node is disconnected
    link load             baseline 0.0; >= 1 means the link is congested
    component energy_w    power draw (floored at 0), optionally per flavour
    component errors      baseline 0; > 0 means the component fails internally

At every tick the simulator checks node capacities against the deployed
demands, marks the components of overloaded or disconnected nodes
unreachable, reports races between co-located components, emits timeouts
for cross-node calls that cannot get through, and samples power. Everything
it observes goes into the round's log and fact base.

Example:
    >>> trace = run_round(deployment, app, infra, scenarios, ticks=120)
    >>> trace.metrics.downtime_pct
    56.666...
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from adaptive_placement.errors import ScenarioError
from adaptive_placement.facts import (
    Congested,
    Disconnected,
    FactBase,
    Internal,
    PowerSamples,
    Race,
    RoundMetrics,
    RoundTrace,
    TimeoutEvent,
    Unreachable,
    coalesce_overloads,
    format_placement_block,
    format_watts,
    log_line,
)
from adaptive_placement.model import (
    ApplicationSpec,
    Deployment,
    InfrastructureSpec,
    max_total_importance,
)

logger = logging.getLogger(__name__)

# =============================================================================
# Constants
# =============================================================================

DEFAULT_TICKS: int = 120
DEFAULT_TICK_MINUTES: float = 1.0

NODE_QUANTITIES: tuple[str, ...] = ("carbon_intensity", "network")
COMPONENT_QUANTITIES: tuple[str, ...] = ("energy_w", "errors")
LINK_QUANTITIES: tuple[str, ...] = ("load",)

EPSILON: float = 1e-9


# =============================================================================
# Scenarios
# =============================================================================


@dataclass(frozen=True)
class Constant:
    """Add ``delta`` for tick_from <= t <= tick_to."""

    delta: float
    tick_from: int
    tick_to: int

    def __post_init__(self) -> None:
        if not (0 <= self.tick_from <= self.tick_to):
            raise ValueError(f"need 0 <= from <= to, got {self.tick_from}..{self.tick_to}")

    def series(self, ticks: int) -> np.ndarray:
        values = np.zeros(ticks)
        values[self.tick_from : min(self.tick_to, ticks - 1) + 1] = self.delta
        return values

    def to_dict(self) -> dict[str, Any]:
        return {"shape": "constant", "delta": self.delta, "from": self.tick_from, "to": self.tick_to}


@dataclass(frozen=True)
class Sinusoidal:
    """
    Add ``amplitude * sin(2 pi (t - from) / period)`` for from <= t <= to.

    ``to - from`` must be a multiple of half a period so the quantity starts
    and ends at its unmodified value.
    """

    amplitude: float
    period: int
    tick_from: int
    tick_to: int

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if not (0 <= self.tick_from <= self.tick_to):
            raise ValueError(f"need 0 <= from <= to, got {self.tick_from}..{self.tick_to}")
        span = 2 * (self.tick_to - self.tick_from)
        if span % self.period != 0:
            raise ValueError(
                f"span {self.tick_to - self.tick_from} is not a multiple of half the period {self.period}"
            )

    def series(self, ticks: int) -> np.ndarray:
        values = np.zeros(ticks)
        t = np.arange(self.tick_from, min(self.tick_to, ticks - 1) + 1)
        values[t] = self.amplitude * np.sin(2.0 * math.pi * (t - self.tick_from) / self.period)
        return values

    def to_dict(self) -> dict[str, Any]:
        return {
            "shape": "sinusoidal",
            "amplitude": self.amplitude,
            "period": self.period,
            "from": self.tick_from,
            "to": self.tick_to,
        }


Shape = Constant | Sinusoidal


@dataclass(frozen=True)
class Scenario:
    """
    One additive modification of one quantity.

    Attributes:
        kind: "node", "link" or "component".
        target: Node or component name; for links, the first endpoint.
        quantity: Resource name, carbon_intensity, network, load, energy_w or
            errors.
        shape: Constant or Sinusoidal delta over ticks.
        other: Second link endpoint.
        flavour: Restrict a component scenario to one flavour.
    """

    kind: str
    target: str
    quantity: str
    shape: Shape
    other: str | None = None
    flavour: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("node", "link", "component"):
            raise ValueError(f"unknown scenario kind '{self.kind}'")
        if self.kind == "link" and self.other is None:
            raise ValueError("a link scenario needs two endpoints")
        if self.kind == "link" and self.quantity not in LINK_QUANTITIES:
            raise ValueError(f"links only support {LINK_QUANTITIES}, got '{self.quantity}'")
        if self.kind == "component" and self.quantity not in COMPONENT_QUANTITIES:
            raise ValueError(f"components only support {COMPONENT_QUANTITIES}, got '{self.quantity}'")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Scenario:
        """
        Build a scenario from its file form, e.g.
        ``{node: public1, quantity: cpu, shape: constant, delta: -1200, from: 31, to: 98}``.

        Raises:
            ValueError: On missing or inconsistent fields.
        """
        shape_name = str(data.get("shape", "constant"))
        try:
            if shape_name == "constant":
                shape: Shape = Constant(float(data["delta"]), int(data["from"]), int(data["to"]))
            elif shape_name == "sinusoidal":
                shape = Sinusoidal(
                    float(data["amplitude"]), int(data["period"]), int(data["from"]), int(data["to"])
                )
            else:
                raise ValueError(f"unknown scenario shape '{shape_name}'")
        except KeyError as exc:
            raise ValueError(f"scenario is missing field {exc.args[0]!r}") from None

        if "link" in data:
            endpoints = list(data["link"])
            if len(endpoints) != 2:
                raise ValueError("a link scenario needs two endpoints")
            return cls("link", str(endpoints[0]), str(data.get("quantity", "load")), shape, str(endpoints[1]))
        if "node" in data:
            return cls("node", str(data["node"]), str(data["quantity"]), shape)
        if "component" in data:
            flavour = data.get("flavour")
            return cls(
                "component",
                str(data["component"]),
                str(data.get("quantity", "energy_w")),
                shape,
                flavour=str(flavour) if flavour is not None else None,
            )
        raise ValueError("scenario needs a node, link or component target")

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "link":
            head: dict[str, Any] = {"link": [self.target, self.other], "quantity": self.quantity}
        else:
            head = {self.kind: self.target, "quantity": self.quantity}
            if self.flavour is not None:
                head["flavour"] = self.flavour
        return {**head, **self.shape.to_dict()}


ScenarioLibrary = dict[str, tuple[Scenario, ...]]


def library_from_dict(data: Mapping[str, Any]) -> ScenarioLibrary:
    """Parse ``{name: [scenario, ...]}`` into a scenario library."""
    library: ScenarioLibrary = {}
    for name, entries in data.items():
        if isinstance(entries, Mapping):
            entries = [entries]
        library[str(name)] = tuple(Scenario.from_dict(entry) for entry in entries or [])
    return library


def library_to_dict(library: ScenarioLibrary) -> dict[str, list[dict[str, Any]]]:
    return {name: [s.to_dict() for s in scenarios] for name, scenarios in library.items()}


# =============================================================================
# Update policies
# =============================================================================


def expand_policy(entries: Sequence[Any]) -> list[tuple[str, ...]]:
    """
    Expand a policy written as segments into one entry per round.

    ``[{scenario: a, repeat: 2}, {scenario: [b, c], repeat: 1}]`` expands to
    ``[("a",), ("a",), ("b", "c")]``; plain names or name lists stand for one
    round each.
    """
    rounds: list[tuple[str, ...]] = []
    for entry in entries:
        if isinstance(entry, Mapping):
            names = entry.get("scenario", [])
            repeat = int(entry.get("repeat", 1))
            if repeat < 0:
                raise ValueError(f"repeat must be >= 0, got {repeat}")
        else:
            names, repeat = entry, 1
        if names is None:
            group: tuple[str, ...] = ()
        elif isinstance(names, str):
            group = (names,)
        else:
            group = tuple(str(n) for n in names)
        rounds.extend([group] * repeat)
    return rounds


@dataclass(frozen=True)
class UpdatePolicy:
    """Scenario names to apply in each round, for the application and the infrastructure."""

    application_policies: tuple[tuple[str, ...], ...] = ()
    infrastructure_policies: tuple[tuple[str, ...], ...] = ()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> UpdatePolicy:
        return cls(
            tuple(expand_policy(data.get("application", []))),
            tuple(expand_policy(data.get("infrastructure", []))),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "application": [list(names) for names in self.application_policies],
            "infrastructure": [list(names) for names in self.infrastructure_policies],
        }

    def check(self, rounds: int, library: ScenarioLibrary) -> None:
        """
        Raises:
            ValueError: If a policy length differs from ``rounds``.
            ScenarioError: If a name is not in the library.
        """
        for label, policy in (
            ("application", self.application_policies),
            ("infrastructure", self.infrastructure_policies),
        ):
            if len(policy) != rounds:
                raise ValueError(f"{label} policy covers {len(policy)} round(s), expected {rounds}")
            for names in policy:
                for name in names:
                    if name not in library:
                        raise ScenarioError(f"unknown scenario '{name}' in {label} policy")

    def scenarios_for(self, round_index: int, library: ScenarioLibrary) -> list[Scenario]:
        names = self.application_policies[round_index] + self.infrastructure_policies[round_index]
        return [scenario for name in names for scenario in library[name]]


# =============================================================================
# Round simulation
# =============================================================================


@dataclass
class _Effective:
    """Per-tick effective values of every quantity touched in a round."""

    ticks: int
    capacity: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    intensity: dict[str, np.ndarray] = field(default_factory=dict)
    network: dict[str, np.ndarray] = field(default_factory=dict)
    load: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    power: dict[str, np.ndarray] = field(default_factory=dict)
    errors: dict[str, np.ndarray] = field(default_factory=dict)


def _effective_values(
    deployment: Deployment,
    app: ApplicationSpec,
    infra: InfrastructureSpec,
    scenarios: Sequence[Scenario],
    ticks: int,
) -> _Effective:
    eff = _Effective(ticks)
    for node in infra.nodes:
        for resource, capacity in node.consumable_capacities.items():
            eff.capacity[(node.name, resource)] = np.full(ticks, float(capacity))
        eff.intensity[node.name] = np.full(ticks, float(node.carbon_intensity))
        eff.network[node.name] = np.ones(ticks)
    for link in infra.links:
        eff.load[link.endpoints] = np.zeros(ticks)
    placements = deployment.assignments
    for component, placement in placements.items():
        flavour = app.component(component).flavour(placement.flavour)
        eff.power[component] = np.full(ticks, float(flavour.energy_profile))
        eff.errors[component] = np.zeros(ticks)

    for scenario in scenarios:
        delta = scenario.shape.series(ticks)
        if scenario.kind == "node":
            if not infra.has_node(scenario.target):
                raise ScenarioError(f"scenario targets unknown node '{scenario.target}'")
            if scenario.quantity == "carbon_intensity":
                eff.intensity[scenario.target] = eff.intensity[scenario.target] + delta
            elif scenario.quantity == "network":
                eff.network[scenario.target] = eff.network[scenario.target] + delta
            elif (scenario.target, scenario.quantity) in eff.capacity:
                key = (scenario.target, scenario.quantity)
                eff.capacity[key] = eff.capacity[key] + delta
            else:
                raise ScenarioError(
                    f"node '{scenario.target}' has no quantity '{scenario.quantity}'"
                )
        elif scenario.kind == "link":
            assert scenario.other is not None
            if infra.link_between(scenario.target, scenario.other) is None or scenario.target == scenario.other:
                raise ScenarioError(f"no link between '{scenario.target}' and '{scenario.other}'")
            key = tuple(sorted((scenario.target, scenario.other)))
            eff.load[key] = eff.load[key] + delta  # type: ignore[index]
        else:
            if not app.has_component(scenario.target):
                raise ScenarioError(f"scenario targets unknown component '{scenario.target}'")
            placement = placements.get(scenario.target)
            if placement is None:
                continue
            if scenario.flavour is not None and scenario.flavour != placement.flavour:
                continue
            table = eff.power if scenario.quantity == "energy_w" else eff.errors
            table[scenario.target] = table[scenario.target] + delta

    for key, values in eff.capacity.items():
        eff.capacity[key] = np.maximum(values, 0.0)
    for name, values in eff.intensity.items():
        eff.intensity[name] = np.maximum(values, 0.0)
    for name, values in eff.power.items():
        eff.power[name] = np.maximum(values, 0.0)
    return eff


def run_round(
    deployment: Deployment,
    app: ApplicationSpec,
    infra: InfrastructureSpec,
    scenarios: Sequence[Scenario] = (),
    ticks: int = DEFAULT_TICKS,
    seed: int = 0,
    tick_minutes: float = DEFAULT_TICK_MINUTES,
) -> RoundTrace:
    """
    Simulate one round of a deployment.

    Args:
        deployment: Deployment to run; may break attribute or dependency
            requirements (the baselines do).
        app: Application as it really behaves.
        infra: Infrastructure as it really is.
        scenarios: Modifications applied during the round.
        ticks: Number of ticks.
        seed: Recorded in the log header; the round is fully determined by
            its inputs.
        tick_minutes: Duration of one tick.

    Returns:
        RoundTrace with facts, power samples, metrics and the rendered log.

    Raises:
        ScenarioError: If a scenario targets something that does not exist.
        ValueError: If ticks < 1 or a scenario ends after the last tick.
    """
    if ticks < 1:
        raise ValueError(f"ticks must be >= 1, got {ticks}")
    for scenario in scenarios:
        if scenario.shape.tick_to >= ticks:
            raise ValueError(f"scenario ends at tick {scenario.shape.tick_to} of a {ticks}-tick round")

    eff = _effective_values(deployment, app, infra, scenarios, ticks)
    placements = deployment.assignments
    hosted: dict[str, list[str]] = {}
    for component, placement in sorted(placements.items()):
        hosted.setdefault(placement.node, []).append(component)
    flavours = {c: app.component(c).flavour(p.flavour) for c, p in placements.items()}

    calls = []
    for component, placement in sorted(placements.items()):
        for dep in flavours[component].dependencies:
            target = placements.get(dep.component)
            if target is not None and target.node != placement.node:
                calls.append((component, dep.component, placement.node, target.node, dep.comm_w))

    facts = FactBase(deployed=set(deployment))
    power = PowerSamples()
    overload_samples: list[tuple[str, str, int, float | None]] = []
    lines = [log_line(0, tick_minutes, f"Simulation - Round started (seed {seed}, {ticks} ticks).")]
    down_ticks = 0
    energy_kwh = co2_g = 0.0
    hours = tick_minutes / 60.0

    for t in range(ticks):
        events: list[str] = []
        monitor: list[str] = []
        failed: set[str] = set()

        disconnected = sorted(n for n in eff.network if eff.network[n][t] <= EPSILON)
        for node in disconnected:
            facts.disconnections.add(Disconnected(node, t))
            events.append(f"disconnected {node} {t}")
            failed.update(hosted.get(node, []))

        for node, components in sorted(hosted.items()):
            resources = sorted({r for c in components for r in flavours[c].consumable_demands})
            for resource in resources:
                used = sum(flavours[c].demand(resource) for c in components)
                capacity = float(eff.capacity.get((node, resource), np.zeros(ticks))[t])
                if used <= capacity + EPSILON:
                    continue
                load = round(100.0 * used / capacity, 1) if capacity > 0 else None
                overload_samples.append((node, resource, t, load))
                suffix = f" {load}%" if load is not None else ""
                events.append(f"overload {node} {resource} {t}{suffix}")
                failed.update(components)
                for c, s in itertools.permutations(components, 2):
                    dc, ds = flavours[c].demand(resource), flavours[s].demand(resource)
                    fits_alone = 0 < dc <= capacity + EPSILON and 0 < ds <= capacity + EPSILON
                    if fits_alone and dc + ds > capacity + EPSILON:
                        race = Race(node, resource, c, placements[c].flavour, s, placements[s].flavour, t)
                        facts.races.add(race)
                        events.append(f"race {' '.join(str(x) for x in race)}")

        for (a, b), values in sorted(eff.load.items()):
            if values[t] >= 1.0 - EPSILON:
                for n, m in ((a, b), (b, a)):
                    facts.congestions.add(Congested(n, m, t))
                    events.append(f"congested {n} {m} {t}")

        internal = sorted(c for c in placements if eff.errors[c][t] > EPSILON)
        for component in sorted(failed):
            facts.unreachables.add(Unreachable(component, t))
            events.append(f"unreachable {component} {t}")
        for component in internal:
            facts.internals.add(Internal(component, t))
            events.append(f"internal {component} {t}")

        for source, target, n, m, _comm in calls:
            link = infra.link_between(n, m)
            blocked = (
                link is None
                or n in disconnected
                or m in disconnected
                or eff.load[link.endpoints][t] >= 1.0 - EPSILON
                or target in failed
                or target in internal
            )
            if blocked:
                facts.timeouts.add(TimeoutEvent(source, target, t))
                events.append(f"timeout {source} {target} {t}")

        if failed or internal:
            down_ticks += 1

        node_power: dict[str, float] = {}
        for component, placement in sorted(placements.items()):
            watts = float(eff.power[component][t])
            power.record(power.component, component, t, watts)
            monitor.append(f"ENERGY {component} {format_watts(watts)} {t}")
            node_power[placement.node] = node_power.get(placement.node, 0.0) + watts
        for node, watts in sorted(node_power.items()):
            power.record(power.node, node, t, watts)
            monitor.append(f"NODEPOWER {node} {format_watts(watts)} {t}")
            kwh = watts / 1000.0 * hours
            energy_kwh += kwh
            co2_g += kwh * float(eff.intensity[node][t])
        for source, target, _n, _m, comm in calls:
            if comm > 0:
                power.record(power.flow, (source, target), t, comm)
                monitor.append(f"FLOWPOWER {source} {target} {format_watts(comm)} {t}")
        for node in infra.node_names:
            value = float(eff.intensity[node][t])
            power.record(power.intensity, node, t, value)
            monitor.append(f"INTENSITY {node} {format_watts(value)} {t}")

        lines.append(log_line(t, tick_minutes, f"Simulation - Event Tick-{t} fired."))
        if t == 0:
            block = format_placement_block(deployment)
            lines.append(log_line(t, tick_minutes, block[0]))
            lines.extend(block[1:])
        lines.extend(log_line(t, tick_minutes, f"Event - {e}") for e in events)
        lines.extend(log_line(t, tick_minutes, f"Monitor - {m}") for m in monitor)

    facts.overloads = coalesce_overloads(overload_samples)
    metrics = round_metrics(deployment, app, ticks, down_ticks, energy_kwh, co2_g)
    logger.info(
        "round: downtime %.2f%%, quality %.2f%%, %.6f kWh, %.3f gCO2",
        metrics.downtime_pct,
        metrics.app_quality_pct,
        metrics.energy_kwh,
        metrics.co2_g,
    )
    return RoundTrace(
        ticks=ticks,
        tick_minutes=tick_minutes,
        deployment=deployment,
        facts=facts,
        power=power,
        metrics=metrics,
        log_lines=lines,
    )


def round_metrics(
    deployment: Deployment,
    app: ApplicationSpec,
    ticks: int,
    down_ticks: int,
    energy_kwh: float,
    co2_g: float,
) -> RoundMetrics:
    """Assemble the round summary; app quality is relative to the best flavours."""
    best = max_total_importance(app)
    importance = sum(
        app.component(a.component).flavour(a.flavour).importance
        for a in deployment
        if app.has_component(a.component)
    )
    quality = 100.0 * importance / best if best > 0 else 0.0
    return RoundMetrics(
        downtime_pct=100.0 * down_ticks / ticks,
        app_quality_pct=min(100.0, quality),
        energy_kwh=energy_kwh,
        co2_g=co2_g,
    )


def write_simulation_log(trace: RoundTrace, path: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(trace.log_text)
