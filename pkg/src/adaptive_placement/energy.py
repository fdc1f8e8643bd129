"""
Energy enhancer and its knowledge base.

After each round the enhancer:

    1. estimates per-service and per-connection emissions from the round's
       power samples and the nodes' aggregated carbon intensity;
    2. folds the round's power profiles and intensity samples into the
       knowledge base;
    3. proposes ``avoid`` constraints for (component, flavour, node) triples
       and ``affinity`` constraints for connections whose projected emissions
       over one round exceed a threshold, weighted by impact relative to the
       largest one;
    4. remembers what it proposed, decaying constraints that are not proposed
       again, and brings back the still-relevant ones.

The knowledge base persists between rounds as one JSON document.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, NamedTuple, Sequence

import numpy as np
import pandas as pd

from adaptive_placement.exporters import parse_constraints
from adaptive_placement.facts import RoundTrace
from adaptive_placement.model import (
    ApplicationSpec,
    Deployment,
    InfrastructureSpec,
    Provenance,
    SoftConstraint,
)

logger = logging.getLogger(__name__)

# =============================================================================
# Constants
# =============================================================================

DEFAULT_DECAY: float = 0.5
DEFAULT_EVICTION_WEIGHT: float = 0.125
DEFAULT_RETRIEVAL_WEIGHT: float = 0.5
DEFAULT_TOP_K: int = 10
DEFAULT_CARBON_WINDOW: int = 30

MIN_CONSTRAINT_WEIGHT: float = 0.001


# =============================================================================
# Profiles and estimates
# =============================================================================


class ServiceKey(NamedTuple):
    component: str
    flavour: str
    node: str


class ConnectionKey(NamedTuple):
    """Directed interaction (component, flavour) -> (target, target_flavour)."""

    component: str
    flavour: str
    target: str
    target_flavour: str


@dataclass(frozen=True)
class EnergyProfile:
    """Observed power draw in watts."""

    min_w: float
    max_w: float
    avg_w: float
    sample_count: int = 1

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be >= 1, got {self.sample_count}")
        if self.min_w < 0:
            raise ValueError(f"power must be >= 0, got min_w={self.min_w}")
        if not (self.min_w - 1e-9 <= self.avg_w <= self.max_w + 1e-9):
            raise ValueError(
                f"expected min_w <= avg_w <= max_w, got {self.min_w}, {self.avg_w}, {self.max_w}"
            )

    @classmethod
    def from_samples(cls, watts: Sequence[float]) -> EnergyProfile:
        values = np.asarray(watts, dtype=np.float64)
        if values.size == 0:
            raise ValueError("cannot build a profile from no samples")
        return cls(float(values.min()), float(values.max()), float(values.mean()), int(values.size))

    def merge(self, other: EnergyProfile) -> EnergyProfile:
        """Widen the range and re-weight the average by sample count."""
        count = self.sample_count + other.sample_count
        average = (self.avg_w * self.sample_count + other.avg_w * other.sample_count) / count
        return EnergyProfile(
            min(self.min_w, other.min_w), max(self.max_w, other.max_w), average, count
        )

    def observe(self, watts: float) -> EnergyProfile:
        return self.merge(EnergyProfile(watts, watts, watts, 1))

    def to_dict(self) -> dict[str, Any]:
        return {
            "min_w": self.min_w,
            "max_w": self.max_w,
            "avg_w": self.avg_w,
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EnergyProfile:
        return cls(
            float(data["min_w"]), float(data["max_w"]), float(data["avg_w"]), int(data["sample_count"])
        )


@dataclass
class RoundEstimates:
    """
    What one round taught the enhancer.

    Attributes:
        services: Profile over active ticks per (component, flavour, node).
        connections: Profile over active ticks per directed connection.
        emissions: gCO2 per service or connection over its active ticks.
        intensity: node -> list of (tick, gCO2/kWh) samples.
    """

    services: dict[ServiceKey, EnergyProfile] = field(default_factory=dict)
    connections: dict[ConnectionKey, EnergyProfile] = field(default_factory=dict)
    emissions: dict[ServiceKey | ConnectionKey, float] = field(default_factory=dict)
    intensity: dict[str, list[tuple[int, float]]] = field(default_factory=dict)


def aggregate_carbon_intensity(samples: Sequence[tuple[int, float]], window: int) -> float:
    """
    Mean intensity over the most recent ``window`` samples.

    Args:
        samples: (tick, gCO2/kWh) pairs; sorted by tick before use.
        window: Number of trailing samples to average.

    Raises:
        ValueError: If samples is empty or window < 1.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if not samples:
        raise ValueError("cannot aggregate an empty intensity series")
    series = pd.Series({tick: value for tick, value in samples}, dtype="float64").sort_index()
    return float(series.iloc[-window:].mean())


def estimate_round(
    trace: RoundTrace, infra: InfrastructureSpec, window: int = DEFAULT_CARBON_WINDOW
) -> RoundEstimates:
    """
    Profile and price every service and connection observed in a round.

    A subject is active at the ticks where it has a power sample. Its
    emissions are average power over active ticks x active hours x the
    aggregated intensity of its node; a connection uses the mean intensity of
    its two endpoint nodes.
    """
    estimates = RoundEstimates()
    placements = trace.deployment.assignments
    hours = trace.tick_hours

    for node in infra.nodes:
        series = trace.power.intensity_series(node.name)
        estimates.intensity[node.name] = series

    def intensity(node: str) -> float:
        series = estimates.intensity.get(node)
        if series:
            return aggregate_carbon_intensity(series, window)
        return infra.node(node).carbon_intensity if infra.has_node(node) else 0.0

    for component, samples in sorted(trace.power.component.items()):
        placement = placements.get(component)
        if placement is None or not samples:
            continue
        key = ServiceKey(component, placement.flavour, placement.node)
        profile = EnergyProfile.from_samples(list(samples.values()))
        estimates.services[key] = profile
        estimates.emissions[key] = (
            profile.avg_w * profile.sample_count * hours / 1000.0 * intensity(placement.node)
        )

    for (source, target), samples in sorted(trace.power.flow.items()):
        a, b = placements.get(source), placements.get(target)
        if a is None or b is None or not samples:
            continue
        key = ConnectionKey(source, a.flavour, target, b.flavour)
        profile = EnergyProfile.from_samples(list(samples.values()))
        estimates.connections[key] = profile
        mean_intensity = (intensity(a.node) + intensity(b.node)) / 2.0
        estimates.emissions[key] = (
            profile.avg_w * profile.sample_count * hours / 1000.0 * mean_intensity
        )
    return estimates


def estimate_emissions(
    trace: RoundTrace, infra: InfrastructureSpec, window: int = DEFAULT_CARBON_WINDOW
) -> dict[ServiceKey | ConnectionKey, float]:
    """
    gCO2 per service and connection over their active ticks.

    Subjects without samples are omitted.
    """
    return estimate_round(trace, infra, window).emissions


# =============================================================================
# Knowledge base
# =============================================================================


@dataclass
class StoredConstraint:
    constraint: SoftConstraint
    impact_g: float
    memory_weight: float = 1.0


@dataclass
class KnowledgeBase:
    """
    Energy knowledge carried across rounds.

    Attributes:
        service_profiles: (component, flavour, node) -> profile.
        connection_profiles: directed connection -> profile.
        node_carbon_history: node -> trailing intensity samples (oldest first).
        stored_constraints: constraint identity -> stored entry.
        decay: Factor applied to a constraint's memory weight each round it
            is not proposed again.
        eviction_weight: Entries at or below this memory weight are dropped.
        retrieval_weight: Entries at or above this memory weight are reused.
        top_k: Length cap of the constraint lists.
        carbon_window: Samples averaged for a node's intensity.
    """

    service_profiles: dict[ServiceKey, EnergyProfile] = field(default_factory=dict)
    connection_profiles: dict[ConnectionKey, EnergyProfile] = field(default_factory=dict)
    node_carbon_history: dict[str, list[float]] = field(default_factory=dict)
    stored_constraints: dict[str, StoredConstraint] = field(default_factory=dict)
    decay: float = DEFAULT_DECAY
    eviction_weight: float = DEFAULT_EVICTION_WEIGHT
    retrieval_weight: float = DEFAULT_RETRIEVAL_WEIGHT
    top_k: int = DEFAULT_TOP_K
    carbon_window: int = DEFAULT_CARBON_WINDOW

    def __post_init__(self) -> None:
        if not (0.0 < self.decay < 1.0):
            raise ValueError(f"decay must be in (0, 1), got {self.decay}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if self.carbon_window < 1:
            raise ValueError(f"carbon_window must be >= 1, got {self.carbon_window}")

    # -------------------------------------------------------------------------
    # Observations
    # -------------------------------------------------------------------------

    def record_carbon(self, node: str, samples: Sequence[float]) -> None:
        history = self.node_carbon_history.setdefault(node, [])
        history.extend(float(s) for s in samples)
        del history[: max(0, len(history) - self.carbon_window)]

    def merge_estimates(self, estimates: RoundEstimates) -> None:
        for key, profile in estimates.services.items():
            known = self.service_profiles.get(key)
            self.service_profiles[key] = profile if known is None else known.merge(profile)
        for ckey, profile in estimates.connections.items():
            cknown = self.connection_profiles.get(ckey)
            self.connection_profiles[ckey] = profile if cknown is None else cknown.merge(profile)
        for node, series in sorted(estimates.intensity.items()):
            if series:
                self.record_carbon(node, [value for _tick, value in sorted(series)])

    def node_intensity(self, node: str, infra: InfrastructureSpec) -> float:
        history = self.node_carbon_history.get(node)
        if history:
            return aggregate_carbon_intensity(list(enumerate(history)), self.carbon_window)
        return infra.node(node).carbon_intensity

    def flavour_power(self) -> dict[tuple[str, str], float]:
        """Average watts per (component, flavour) across observed nodes."""
        totals: dict[tuple[str, str], tuple[float, int]] = {}
        for key, profile in self.service_profiles.items():
            watts, count = totals.get((key.component, key.flavour), (0.0, 0))
            totals[(key.component, key.flavour)] = (
                watts + profile.avg_w * profile.sample_count,
                count + profile.sample_count,
            )
        return {pair: watts / count for pair, (watts, count) in sorted(totals.items())}

    # -------------------------------------------------------------------------
    # Constraint memory
    # -------------------------------------------------------------------------

    def remember(
        self, constraints: Sequence[SoftConstraint], impacts: Mapping[str, float] | None = None
    ) -> None:
        """Reset proposed constraints to full memory weight and decay the rest."""
        impacts = impacts or {}
        fresh = {c.identity: c for c in constraints}
        for identity in sorted(self.stored_constraints):
            if identity in fresh:
                continue
            entry = self.stored_constraints[identity]
            entry.memory_weight *= self.decay
            if entry.memory_weight <= self.eviction_weight + 1e-12:
                logger.debug("evicting %s (memory weight %.3f)", identity, entry.memory_weight)
                del self.stored_constraints[identity]
        for identity, constraint in fresh.items():
            previous = self.stored_constraints.get(identity)
            impact = impacts.get(identity, previous.impact_g if previous else 0.0)
            self.stored_constraints[identity] = StoredConstraint(constraint, impact, 1.0)

    def retrieve(self, fresh: Sequence[SoftConstraint]) -> list[SoftConstraint]:
        """
        Merge still-relevant stored constraints into a fresh list.

        Union by identity keeping the larger weight, sorted by descending
        weight then text, truncated to top_k.
        """
        merged: dict[str, SoftConstraint] = {c.identity: c for c in fresh}
        for identity, entry in self.stored_constraints.items():
            if entry.memory_weight < self.retrieval_weight - 1e-12:
                continue
            current = merged.get(identity)
            if current is None or entry.constraint.weight > current.weight:
                merged[identity] = entry.constraint
        return rank(list(merged.values()))[: self.top_k]


def update_knowledge(
    kb: KnowledgeBase,
    round_estimates: RoundEstimates | None,
    new_constraints: Sequence[SoftConstraint] | None,
    impacts: Mapping[str, float] | None = None,
) -> KnowledgeBase:
    """
    Return an updated copy of ``kb``.

    Args:
        kb: Knowledge base before the round.
        round_estimates: Profiles and intensity samples to merge, or None.
        new_constraints: Constraints proposed this round, or None to leave the
            constraint memory untouched.
        impacts: Optional identity -> gCO2 impact of the new constraints.
    """
    updated = copy.deepcopy(kb)
    if round_estimates is not None:
        updated.merge_estimates(round_estimates)
    if new_constraints is not None:
        updated.remember(new_constraints, impacts)
    return updated


# =============================================================================
# Constraint generation
# =============================================================================


@dataclass(frozen=True)
class EnergyThresholds:
    """Projected gCO2 per round above which a constraint is proposed."""

    service_gco2: float = 50.0
    connection_gco2: float = 50.0

    def __post_init__(self) -> None:
        if self.service_gco2 < 0 or self.connection_gco2 < 0:
            raise ValueError("thresholds must be >= 0")


class EnergyCandidate(NamedTuple):
    constraint: SoftConstraint
    impact_g: float


def rank(constraints: Sequence[SoftConstraint]) -> list[SoftConstraint]:
    return sorted(constraints, key=lambda c: (-c.weight, c.to_text()))


def energy_candidates(
    kb: KnowledgeBase,
    app: ApplicationSpec,
    infra: InfrastructureSpec,
    current: Deployment,
    thresholds: EnergyThresholds,
    horizon_hours: float,
) -> list[EnergyCandidate]:
    """Unweighted avoid/affinity candidates with their projected impact."""
    candidates: list[EnergyCandidate] = []
    averaged = kb.flavour_power()

    for component, flavour_name in sorted(averaged):
        if not app.has_component(component):
            continue
        comp = app.component(component)
        if not comp.has_flavour(flavour_name):
            continue
        flavour = comp.flavour(flavour_name)
        feasible = [
            node
            for node in infra.nodes
            if node.available and node.satisfies(flavour.attribute_requirements)
        ]
        impacts: dict[str, float] = {}
        for node in feasible:
            profile = kb.service_profiles.get(ServiceKey(component, flavour_name, node.name))
            watts = profile.avg_w if profile is not None else averaged[(component, flavour_name)]
            impacts[node.name] = watts * horizon_hours / 1000.0 * kb.node_intensity(node.name, infra)

        avoided = sorted(name for name, impact in impacts.items() if impact > thresholds.service_gco2)
        if avoided and len(avoided) == len(feasible):
            spared = min(avoided, key=lambda name: (impacts[name], name))
            avoided.remove(spared)
            logger.debug("keeping %s_%s on %s open", component, flavour_name, spared)
        for name in avoided:
            constraint = SoftConstraint.avoid(component, flavour_name, name, Provenance.ENERGY)
            candidates.append(EnergyCandidate(constraint, impacts[name]))

    placements = current.assignments
    for key, profile in sorted(kb.connection_profiles.items()):
        a, b = placements.get(key.component), placements.get(key.target)
        if a is None or b is None or a.node == b.node or key.component == key.target:
            continue
        if (a.flavour, b.flavour) != (key.flavour, key.target_flavour):
            continue
        mean_intensity = (kb.node_intensity(a.node, infra) + kb.node_intensity(b.node, infra)) / 2.0
        impact = profile.avg_w * horizon_hours / 1000.0 * mean_intensity
        if impact > thresholds.connection_gco2:
            constraint = SoftConstraint.affinity(
                key.component, key.flavour, key.target, key.target_flavour, Provenance.ENERGY
            )
            candidates.append(EnergyCandidate(constraint, impact))

    merged: dict[str, EnergyCandidate] = {}
    for candidate in candidates:
        known = merged.get(candidate.constraint.identity)
        if known is None or candidate.impact_g > known.impact_g:
            merged[candidate.constraint.identity] = candidate
    return list(merged.values())


def weigh(candidates: Sequence[EnergyCandidate], top_k: int = DEFAULT_TOP_K) -> list[SoftConstraint]:
    """Normalise impacts by the largest one and keep the top_k heaviest."""
    if not candidates:
        return []
    peak = max(candidate.impact_g for candidate in candidates)
    weighted = []
    for candidate in candidates:
        weight = round(candidate.impact_g / peak, 3) if peak > 0 else 1.0
        weighted.append(candidate.constraint.with_weight(max(MIN_CONSTRAINT_WEIGHT, weight)))
    return rank(weighted)[:top_k]


def generate_constraints(
    kb: KnowledgeBase,
    app: ApplicationSpec,
    infra: InfrastructureSpec,
    current: Deployment,
    thresholds: EnergyThresholds | None = None,
    horizon_hours: float = 2.0,
) -> list[SoftConstraint]:
    """
    Propose ranked energy constraints.

    Args:
        kb: Knowledge base already holding the latest round.
        app: Application specification (for attribute feasibility).
        infra: Infrastructure specification.
        current: Deployment in force (connections are judged on it).
        thresholds: gCO2 thresholds; defaults to EnergyThresholds().
        horizon_hours: Round duration used to project emissions.

    Returns:
        Energy-provenance constraints, heaviest first, at most kb.top_k.
        An avoid set never covers every node a flavour could run on: the
        lowest-impact one stays open.
    """
    candidates = energy_candidates(
        kb, app, infra, current, thresholds or EnergyThresholds(), horizon_hours
    )
    constraints = weigh(candidates, kb.top_k)
    logger.info("energy enhancer proposed %d constraint(s)", len(constraints))
    return constraints


# =============================================================================
# Persistence
# =============================================================================


def knowledge_base_to_dict(kb: KnowledgeBase) -> dict[str, Any]:
    return {
        "settings": {
            "decay": kb.decay,
            "eviction_weight": kb.eviction_weight,
            "retrieval_weight": kb.retrieval_weight,
            "top_k": kb.top_k,
            "carbon_window": kb.carbon_window,
        },
        "services": [
            {**key._asdict(), **profile.to_dict()}
            for key, profile in sorted(kb.service_profiles.items())
        ],
        "connections": [
            {**key._asdict(), **profile.to_dict()}
            for key, profile in sorted(kb.connection_profiles.items())
        ],
        "carbon": {node: list(history) for node, history in sorted(kb.node_carbon_history.items())},
        "constraints": [
            {
                "constraint": entry.constraint.to_text(),
                "provenance": entry.constraint.provenance.value,
                "impact_g": entry.impact_g,
                "memory_weight": entry.memory_weight,
            }
            for _identity, entry in sorted(kb.stored_constraints.items())
        ],
    }


def knowledge_base_from_dict(data: Mapping[str, Any]) -> KnowledgeBase:
    kb = KnowledgeBase(**data.get("settings", {}))
    for record in data.get("services", []):
        key = ServiceKey(record["component"], record["flavour"], record["node"])
        kb.service_profiles[key] = EnergyProfile.from_dict(record)
    for record in data.get("connections", []):
        ckey = ConnectionKey(
            record["component"], record["flavour"], record["target"], record["target_flavour"]
        )
        kb.connection_profiles[ckey] = EnergyProfile.from_dict(record)
    for node, history in data.get("carbon", {}).items():
        kb.node_carbon_history[node] = [float(v) for v in history]
    for record in data.get("constraints", []):
        (constraint,) = parse_constraints(record["constraint"])
        constraint = replace(constraint, provenance=Provenance(record.get("provenance", "energy")))
        kb.stored_constraints[constraint.identity] = StoredConstraint(
            constraint, float(record.get("impact_g", 0.0)), float(record["memory_weight"])
        )
    return kb


def save_knowledge_base(kb: KnowledgeBase, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(knowledge_base_to_dict(kb), f, indent=2, sort_keys=False)
        f.write("\n")


def load_knowledge_base(path: str | Path) -> KnowledgeBase:
    """
    Load a knowledge base; a missing file yields an empty one.

    Raises:
        json.JSONDecodeError: If the file is not valid JSON.
    """
    if not Path(path).exists():
        return KnowledgeBase()
    with open(path, encoding="utf-8") as f:
        return knowledge_base_from_dict(json.load(f))


