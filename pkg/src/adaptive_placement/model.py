"""
Domain model for adaptive deployment planning.

This module holds every value object shared by the solver, the enhancers and
the simulator: the application (components and their flavours), the
infrastructure (nodes and links), a deployment, and the soft constraints the
enhancers suggest.

All classes are frozen dataclasses. Updates (for example refreshed energy
profiles) go through helper methods that return new instances, so a spec
value can be shared freely between the planner and the simulator.

Cross-object rules (dangling references, duplicate names, capacity signs) are
not enforced at construction; ``validate_specs`` reports them as a list so a
caller can show every problem at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Iterator, Mapping, NamedTuple

# =============================================================================
# Constants
# =============================================================================

# Separator used in simulator placement blocks ("api_large -> private1").
# Flavour names may not contain it.
FLAVOUR_SEPARATOR: str = "_"


# =============================================================================
# Application
# =============================================================================


@dataclass(frozen=True)
class Dependency:
    """
    A requirement of one flavour on another component.

    Attributes:
        component: Name of the component that must be deployed.
        min_importance: Lowest flavour importance of the target that
            satisfies the requirement.
        max_latency: Optional latency bound (ms) on the link between the
            two hosting nodes.
        min_availability: Optional availability bound on that link.
        comm_w: Power (W) drawn by the interaction while the endpoints sit
            on distinct nodes.
    """

    component: str
    min_importance: int = 1
    max_latency: float | None = None
    min_availability: float | None = None
    comm_w: float = 0.0


@dataclass(frozen=True)
class Flavour:
    """
    One variant of a component.

    Attributes:
        name: Flavour identifier (e.g. "tiny", "large").
        importance: Positive power score, strictly ordered per component.
        consumable_demands: Resource name -> quantity (cpu millicores,
            ram MB, storage MB, ...).
        attribute_requirements: Attribute name -> allowed values; a node
            satisfies the flavour when each of its attributes is in the set.
        dependencies: Components this flavour needs.
        energy_profile: Average power draw in watts.
    """

    name: str
    importance: int
    consumable_demands: Mapping[str, float] = field(default_factory=dict)
    attribute_requirements: Mapping[str, tuple[Any, ...]] = field(default_factory=dict)
    dependencies: tuple[Dependency, ...] = ()
    energy_profile: float = 0.0

    def demand(self, resource: str) -> float:
        return float(self.consumable_demands.get(resource, 0.0))

    def problems(self, path: str) -> list[str]:
        """Return local invariant violations prefixed with ``path``."""
        found: list[str] = []
        if not self.name:
            found.append(f"{path}: flavour name is empty")
        elif FLAVOUR_SEPARATOR in self.name:
            found.append(f"{path}: flavour name '{self.name}' may not contain '_'")
        if not isinstance(self.importance, int) or self.importance <= 0:
            found.append(f"{path}: importance must be a positive integer, got {self.importance}")
        for resource, quantity in self.consumable_demands.items():
            if not _is_finite(quantity) or quantity < 0:
                found.append(f"{path}: demand for '{resource}' must be >= 0, got {quantity}")
        if not _is_finite(self.energy_profile) or self.energy_profile < 0:
            found.append(f"{path}: energy profile must be >= 0, got {self.energy_profile}")
        for dep in self.dependencies:
            if dep.min_importance <= 0:
                found.append(
                    f"{path}: dependency on '{dep.component}' needs a positive min_importance"
                )
            if dep.comm_w < 0:
                found.append(f"{path}: dependency on '{dep.component}' has negative comm_w")
        return found


@dataclass(frozen=True)
class Component:
    """A deployable unit of the application with its alternative flavours."""

    name: str
    flavours: tuple[Flavour, ...]
    mandatory: bool = True

    def flavour(self, name: str) -> Flavour:
        """
        Look up a flavour by name.

        Raises:
            KeyError: If the component has no such flavour.
        """
        for flavour in self.flavours:
            if flavour.name == name:
                return flavour
        raise KeyError(f"component '{self.name}' has no flavour '{name}'")

    def has_flavour(self, name: str) -> bool:
        return any(f.name == name for f in self.flavours)

    @property
    def max_importance(self) -> int:
        return max((f.importance for f in self.flavours), default=0)

    @property
    def flavours_by_importance(self) -> list[Flavour]:
        """Flavours from most to least powerful."""
        return sorted(self.flavours, key=lambda f: (-f.importance, f.name))


@dataclass(frozen=True)
class ApplicationSpec:
    """
    A microservice application with its budgets.

    Attributes:
        name: Application identifier.
        components: Components in declaration order.
        monetary_budget: Upper bound on sum(demand x unit cost).
        carbon_budget: Upper bound on projected grams of CO2 per round.
        energy_budget: Upper bound on projected kWh per round.
    """

    name: str
    components: tuple[Component, ...]
    monetary_budget: float
    carbon_budget: float
    energy_budget: float

    def component(self, name: str) -> Component:
        for component in self.components:
            if component.name == name:
                return component
        raise KeyError(f"unknown component '{name}'")

    def has_component(self, name: str) -> bool:
        return any(c.name == name for c in self.components)

    @property
    def component_names(self) -> list[str]:
        return [c.name for c in self.components]

    def with_energy_profiles(self, profiles: Mapping[tuple[str, str], float]) -> ApplicationSpec:
        """
        Return a copy with refreshed flavour energy profiles.

        Args:
            profiles: (component, flavour) -> watts. Pairs not present keep
                their current value.
        """
        components = []
        for component in self.components:
            flavours = tuple(
                replace(f, energy_profile=float(profiles[(component.name, f.name)]))
                if (component.name, f.name) in profiles
                else f
                for f in component.flavours
            )
            components.append(replace(component, flavours=flavours))
        return replace(self, components=tuple(components))


# =============================================================================
# Infrastructure
# =============================================================================


@dataclass(frozen=True)
class Node:
    """
    A host in the Cloud-Edge infrastructure.

    Attributes:
        name: Node identifier.
        consumable_capacities: Resource name -> capacity.
        attributes: Non-consumable properties (subnet, encrypted_storage, ...).
        unit_costs: Resource name -> currency per unit of demand.
        carbon_intensity: Grid intensity in gCO2/kWh.
        available: False once the node is known to have failed.
    """

    name: str
    consumable_capacities: Mapping[str, float] = field(default_factory=dict)
    attributes: Mapping[str, Any] = field(default_factory=dict)
    unit_costs: Mapping[str, float] = field(default_factory=dict)
    carbon_intensity: float = 0.0
    available: bool = True

    def capacity(self, resource: str) -> float:
        return float(self.consumable_capacities.get(resource, 0.0))

    def satisfies(self, requirements: Mapping[str, Iterable[Any]]) -> bool:
        """Return True when every required attribute takes an allowed value."""
        for attribute, allowed in requirements.items():
            if attribute not in self.attributes:
                return False
            if self.attributes[attribute] not in tuple(allowed):
                return False
        return True


@dataclass(frozen=True)
class Link:
    """An undirected connection between two nodes."""

    endpoints: tuple[str, str]
    latency: float = 0.0
    availability: float = 1.0

    def __post_init__(self) -> None:
        a, b = self.endpoints
        object.__setattr__(self, "endpoints", (a, b) if a <= b else (b, a))

    def connects(self, a: str, b: str) -> bool:
        return self.endpoints == ((a, b) if a <= b else (b, a))


@dataclass(frozen=True)
class InfrastructureSpec:
    """Nodes plus the links between them."""

    nodes: tuple[Node, ...]
    links: tuple[Link, ...] = ()

    def node(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise KeyError(f"unknown node '{name}'")

    def has_node(self, name: str) -> bool:
        return any(n.name == name for n in self.nodes)

    @property
    def node_names(self) -> list[str]:
        return [n.name for n in self.nodes]

    def link_between(self, a: str, b: str) -> Link | None:
        """Return the link joining two nodes; a node is always linked to itself."""
        if a == b:
            return Link((a, a), latency=0.0, availability=1.0)
        for link in self.links:
            if link.connects(a, b):
                return link
        return None

    def with_unavailable(self, names: Iterable[str]) -> InfrastructureSpec:
        """Return a copy where the named nodes are marked unavailable."""
        dead = set(names)
        nodes = tuple(replace(n, available=False) if n.name in dead else n for n in self.nodes)
        return replace(self, nodes=nodes)

    def without_node(self, name: str) -> InfrastructureSpec:
        """Return a copy with the node and its links removed."""
        return InfrastructureSpec(
            nodes=tuple(n for n in self.nodes if n.name != name),
            links=tuple(link for link in self.links if name not in link.endpoints),
        )

    def with_carbon_intensities(self, intensities: Mapping[str, float]) -> InfrastructureSpec:
        nodes = tuple(
            replace(n, carbon_intensity=float(intensities[n.name])) if n.name in intensities else n
            for n in self.nodes
        )
        return replace(self, nodes=nodes)


# =============================================================================
# Deployment
# =============================================================================


class Assignment(NamedTuple):
    """One entry of a deployment: component c runs flavour f on node n."""

    component: str
    flavour: str
    node: str


class Placement(NamedTuple):
    flavour: str
    node: str


@dataclass(frozen=True)
class Deployment:
    """
    A (possibly partial) placement of components.

    Entries are kept sorted so two deployments with the same assignments
    compare equal and serialise identically. Duplicate components are
    representable on purpose: ``verify_deployment`` reports them.
    """

    entries: tuple[Assignment, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(sorted(Assignment(*e) for e in self.entries)))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, tuple[str, str]]) -> Deployment:
        return cls(tuple(Assignment(c, f, n) for c, (f, n) in mapping.items()))

    @property
    def assignments(self) -> dict[str, Placement]:
        return {e.component: Placement(e.flavour, e.node) for e in self.entries}

    def get(self, component: str) -> Placement | None:
        for entry in self.entries:
            if entry.component == component:
                return Placement(entry.flavour, entry.node)
        return None

    def components_on(self, node: str) -> list[str]:
        return [e.component for e in self.entries if e.node == node]

    def kept_from(self, previous: Deployment) -> int:
        """Number of components keeping the exact (flavour, node) of ``previous``."""
        mine = self.assignments
        return sum(1 for c, p in previous.assignments.items() if mine.get(c) == p)

    def changes_from(self, previous: Deployment) -> int:
        """Number of components whose (flavour, node) differs from ``previous``."""
        mine = self.assignments
        theirs = previous.assignments
        return sum(1 for c in set(mine) | set(theirs) if mine.get(c) != theirs.get(c))

    def __iter__(self) -> Iterator[Assignment]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


# =============================================================================
# Soft constraints
# =============================================================================


class ConstraintKind(str, Enum):
    AFFINITY = "affinity"
    ANTI_AFFINITY = "antiaffinity"
    AVOID = "avoid"


class Provenance(str, Enum):
    FAILURE = "failure"
    ENERGY = "energy"


@dataclass(frozen=True)
class SoftConstraint:
    """
    An enhancer suggestion that the solver enforces as a hard constraint
    unless the relaxation loop drops it.

    For ``AVOID`` the target is a node and ``target_flavour`` is None. For the
    pairwise kinds the target is the other component; the two endpoints are
    stored in sorted order so ``affinity(a, b)`` equals ``affinity(b, a)``.
    Provenance is informational and does not take part in equality.
    """

    kind: ConstraintKind
    component: str
    flavour: str
    target: str
    target_flavour: str | None = None
    provenance: Provenance = field(default=Provenance.FAILURE, compare=False)
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.weight <= 1.0):
            raise ValueError(f"weight must be in (0, 1], got {self.weight}")
        if self.kind is ConstraintKind.AVOID:
            if self.target_flavour is not None:
                raise ValueError("avoid constraints name a node, not a flavoured component")
            return
        if self.target_flavour is None:
            raise ValueError(f"{self.kind.value} needs a flavour for '{self.target}'")
        if self.component == self.target:
            raise ValueError(f"{self.kind.value} must relate two distinct components")
        if (self.target, self.target_flavour) < (self.component, self.flavour):
            c, fc = self.component, self.flavour
            object.__setattr__(self, "component", self.target)
            object.__setattr__(self, "flavour", self.target_flavour)
            object.__setattr__(self, "target", c)
            object.__setattr__(self, "target_flavour", fc)

    # -------------------------------------------------------------------------
    # Constructors
    # -------------------------------------------------------------------------

    @classmethod
    def avoid(
        cls,
        component: str,
        flavour: str,
        node: str,
        provenance: Provenance = Provenance.FAILURE,
        weight: float = 1.0,
    ) -> SoftConstraint:
        return cls(ConstraintKind.AVOID, component, flavour, node, None, provenance, weight)

    @classmethod
    def affinity(
        cls,
        component: str,
        flavour: str,
        other: str,
        other_flavour: str,
        provenance: Provenance = Provenance.FAILURE,
        weight: float = 1.0,
    ) -> SoftConstraint:
        return cls(
            ConstraintKind.AFFINITY, component, flavour, other, other_flavour, provenance, weight
        )

    @classmethod
    def anti_affinity(
        cls,
        component: str,
        flavour: str,
        other: str,
        other_flavour: str,
        provenance: Provenance = Provenance.FAILURE,
        weight: float = 1.0,
    ) -> SoftConstraint:
        return cls(
            ConstraintKind.ANTI_AFFINITY, component, flavour, other, other_flavour, provenance, weight
        )

    # -------------------------------------------------------------------------
    # Views
    # -------------------------------------------------------------------------

    @property
    def is_pairwise(self) -> bool:
        return self.kind is not ConstraintKind.AVOID

    @property
    def pair(self) -> tuple[tuple[str, str], tuple[str, str]]:
        """Normalised endpoint pair of a pairwise constraint."""
        return ((self.component, self.flavour), (self.target, self.target_flavour or ""))

    @property
    def identity(self) -> str:
        """Weight-free textual form; two constraints with one identity are duplicates."""
        if self.kind is ConstraintKind.AVOID:
            return f"avoid(d({self.component},{self.flavour}),{self.target})"
        return (
            f"{self.kind.value}({self.component},{self.flavour},"
            f"{self.target},{self.target_flavour})"
        )

    def to_text(self) -> str:
        """Render as a functor line; a weight of 1.0 is left implicit."""
        if self.weight == 1.0:
            return f"{self.identity}."
        return f"{self.identity[:-1]},{_format_weight(self.weight)})."

    def with_weight(self, weight: float) -> SoftConstraint:
        return replace(self, weight=weight)

    def with_provenance(self, provenance: Provenance) -> SoftConstraint:
        return replace(self, provenance=provenance)

    def references(self) -> tuple[list[str], list[str]]:
        """Return (components, nodes) named by the constraint."""
        if self.kind is ConstraintKind.AVOID:
            return [self.component], [self.target]
        return [self.component, self.target], []


def _format_weight(weight: float) -> str:
    return repr(float(weight))


# =============================================================================
# Validation
# =============================================================================


def validate_specs(app: ApplicationSpec, infra: InfrastructureSpec) -> list[str]:
    """
    Check every invariant of an application/infrastructure pair.

    Args:
        app: Application specification.
        infra: Infrastructure specification.

    Returns:
        Human-readable violation descriptions, empty when the pair is valid.
        The order is deterministic (declaration order).
    """
    violations: list[str] = []
    violations.extend(validate_application(app))
    violations.extend(validate_infrastructure(infra))
    return violations


def validate_application(app: ApplicationSpec) -> list[str]:
    found: list[str] = []
    for label, value in [
        ("monetary_budget", app.monetary_budget),
        ("carbon_budget", app.carbon_budget),
        ("energy_budget", app.energy_budget),
    ]:
        if not _is_finite(value) or value < 0:
            found.append(f"app.{label}: must be a finite number >= 0, got {value}")

    names = [c.name for c in app.components]
    for duplicate in _duplicates(names):
        found.append(f"app.components: duplicate component name '{duplicate}'")

    known = set(names)
    for ci, component in enumerate(app.components):
        path = f"app.components[{ci}]"
        if not component.flavours:
            found.append(f"{path}: component '{component.name}' has no flavours")
        for duplicate in _duplicates([f.name for f in component.flavours]):
            found.append(f"{path}: duplicate flavour name '{duplicate}'")
        for duplicate in _duplicates([f.importance for f in component.flavours]):
            found.append(f"{path}: importance {duplicate} used by more than one flavour")
        for fi, flavour in enumerate(component.flavours):
            fpath = f"{path}.flavours[{fi}]"
            found.extend(flavour.problems(fpath))
            for dep in flavour.dependencies:
                if dep.component not in known:
                    found.append(f"{fpath}: dependency on unknown component '{dep.component}'")
                elif dep.component == component.name:
                    found.append(f"{fpath}: component '{component.name}' depends on itself")
    return found


def validate_infrastructure(infra: InfrastructureSpec) -> list[str]:
    found: list[str] = []
    names = [n.name for n in infra.nodes]
    for duplicate in _duplicates(names):
        found.append(f"infra.nodes: duplicate node name '{duplicate}'")

    for ni, node in enumerate(infra.nodes):
        path = f"infra.nodes[{ni}]"
        for resource, capacity in node.consumable_capacities.items():
            if not _is_finite(capacity) or capacity < 0:
                found.append(f"{path}: capacity of '{resource}' must be >= 0, got {capacity}")
        for resource in node.unit_costs:
            if resource not in node.consumable_capacities:
                found.append(f"{path}: unit cost for '{resource}' without a matching capacity")
        if not _is_finite(node.carbon_intensity) or node.carbon_intensity < 0:
            found.append(f"{path}: carbon_intensity must be >= 0, got {node.carbon_intensity}")

    known = set(names)
    seen_pairs: set[tuple[str, str]] = set()
    for li, link in enumerate(infra.links):
        path = f"infra.links[{li}]"
        for endpoint in link.endpoints:
            if endpoint not in known:
                found.append(f"{path}: link references unknown node '{endpoint}'")
        if link.endpoints in seen_pairs:
            found.append(f"{path}: more than one link between {link.endpoints[0]} and {link.endpoints[1]}")
        seen_pairs.add(link.endpoints)
        if link.latency < 0:
            found.append(f"{path}: latency must be >= 0, got {link.latency}")
        if not (0.0 <= link.availability <= 1.0):
            found.append(f"{path}: availability must be in [0, 1], got {link.availability}")
    return found


def max_total_importance(app: ApplicationSpec) -> int:
    """Sum over components of their most powerful flavour's importance."""
    return sum(component.max_importance for component in app.components)


# =============================================================================
# Helpers
# =============================================================================


def _duplicates(values: Iterable[Any]) -> list[Any]:
    seen: set[Any] = set()
    reported: list[Any] = []
    for value in values:
        if value in seen and value not in reported:
            reported.append(value)
        seen.add(value)
    return reported


def _is_finite(value: Any) -> bool:
    try:
        return math.isfinite(float(value))
    except (TypeError, ValueError):
        return False
