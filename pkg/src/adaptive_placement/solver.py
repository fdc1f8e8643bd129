"""
Exact placement solver.

Each component gets at most one (flavour, node) pair. A deployment is valid
when:

    - every component appears at most once and every mandatory one appears;
    - every dependency of an assigned flavour is met by an assigned target
      with enough importance, over a link (or the same node) honouring the
      declared latency and availability bounds;
    - optional components run only when some assigned component needs them;
    - node capacities, attribute requirements and node availability hold;
    - cost, projected energy and projected emissions stay within budget;
    - every enforced soft constraint holds.

Two objective regimes exist. ``MAXIMIZE_IMPORTANCE`` maximises the summed
importance of the assigned flavours. ``MINIMIZE_CHANGES`` maximises the
number of components that keep their previous (flavour, node), then the
summed importance. Ties always go to the deployment that is smallest when
components are read in name order, each value as (flavour, node), with "not
deployed" last.

The search runs in two phases. A branch-and-bound pass over components in
descending importance order finds the optimal objective; a second pass walks
the canonical order and stops at the first solution reaching it. Both passes
prune with an optimistic objective bound and incremental capacity checks on
numpy usage tables.

Example:
    >>> problem = PlacementProblem(app, infra)
    >>> outcome = solve(problem, time_limit=30)
    >>> outcome.status, outcome.objective_value
    (<SolveStatus.OPTIMAL: 'optimal'>, 21)
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Any, NamedTuple, Sequence

import numpy as np

from adaptive_placement.errors import OracleSizeError, SpecError
from adaptive_placement.model import (
    ApplicationSpec,
    ConstraintKind,
    Deployment,
    InfrastructureSpec,
    SoftConstraint,
)

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

# =============================================================================
# Constants
# =============================================================================

DEFAULT_TIME_LIMIT: float = 300.0

# Budget horizon: one round of 120 one-minute ticks.
DEFAULT_HORIZON_HOURS: float = 2.0

ORACLE_CANDIDATE_LIMIT: int = 10**7

EPSILON: float = 1e-9

# Wall-clock checks happen once per this many search nodes.
_CLOCK_INTERVAL: int = 512


# =============================================================================
# Problem and outcome
# =============================================================================


class ObjectiveMode(str, Enum):
    MAXIMIZE_IMPORTANCE = "first"
    MINIMIZE_CHANGES = "redeploy"


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    UNSATISFIABLE = "unsatisfiable"
    TIMED_OUT = "timeout"


@dataclass(frozen=True)
class PlacementProblem:
    """
    One solver call.

    Attributes:
        app: Application to place.
        infra: Infrastructure to place it on.
        hard_soft: Soft constraints currently enforced as hard.
        previous: Deployment of the previous round, required for
            ``MINIMIZE_CHANGES``.
        objective: Objective regime.
        horizon_hours: Duration over which energy and emission budgets are
            projected.
    """

    app: ApplicationSpec
    infra: InfrastructureSpec
    hard_soft: tuple[SoftConstraint, ...] = ()
    previous: Deployment | None = None
    objective: ObjectiveMode = ObjectiveMode.MAXIMIZE_IMPORTANCE
    horizon_hours: float = DEFAULT_HORIZON_HOURS

    def __post_init__(self) -> None:
        object.__setattr__(self, "hard_soft", tuple(self.hard_soft))
        if self.objective is ObjectiveMode.MINIMIZE_CHANGES and self.previous is None:
            raise ValueError("the redeploy objective needs a previous deployment")
        if self.horizon_hours <= 0:
            raise ValueError(f"horizon_hours must be positive, got {self.horizon_hours}")
        for constraint in self.hard_soft:
            self._check_references(constraint)

    def _check_references(self, constraint: SoftConstraint) -> None:
        pairs = [(constraint.component, constraint.flavour)]
        if constraint.is_pairwise:
            pairs.append((constraint.target, constraint.target_flavour or ""))
        elif not self.infra.has_node(constraint.target):
            raise SpecError(f"{constraint.to_text()} names unknown node '{constraint.target}'")
        for component, flavour in pairs:
            if not self.app.has_component(component):
                raise SpecError(f"{constraint.to_text()} names unknown component '{component}'")
            if not self.app.component(component).has_flavour(flavour):
                raise SpecError(
                    f"{constraint.to_text()} names unknown flavour '{flavour}' of '{component}'"
                )

    def with_soft(self, constraints: Sequence[SoftConstraint]) -> PlacementProblem:
        return replace(self, hard_soft=tuple(constraints))


@dataclass(frozen=True)
class SolveOutcome:
    """
    Result of ``solve`` or ``brute_force_oracle``.

    Attributes:
        status: Optimal, unsatisfiable or timed out.
        deployment: The optimum, or the incumbent when timed out.
        objective_value: Summed importance (first deployment) or kept count
            (redeploy) of ``deployment``.
        importance: Summed importance of ``deployment``.
        elapsed: Wall-clock seconds spent.
        explored: Search nodes visited.
    """

    status: SolveStatus
    deployment: Deployment | None = None
    objective_value: int | None = None
    importance: int | None = None
    elapsed: float = 0.0
    explored: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


def objective_of(deployment: Deployment, problem: PlacementProblem) -> tuple[int, int]:
    """
    Score a deployment as (kept, importance).

    ``kept`` is 0 in the first-deployment regime. Unknown entries score 0.
    """
    importance = 0
    for entry in deployment:
        if problem.app.has_component(entry.component):
            component = problem.app.component(entry.component)
            if component.has_flavour(entry.flavour):
                importance += component.flavour(entry.flavour).importance
    kept = 0
    if problem.objective is ObjectiveMode.MINIMIZE_CHANGES and problem.previous is not None:
        kept = deployment.kept_from(problem.previous)
    return kept, importance


def _primary(objective: tuple[int, int], problem: PlacementProblem) -> int:
    return objective[0] if problem.objective is ObjectiveMode.MINIMIZE_CHANGES else objective[1]


# =============================================================================
# Verification
# =============================================================================


def verify_deployment(deployment: Deployment, problem: PlacementProblem) -> list[str]:
    """
    List every validity condition a deployment breaks.

    Args:
        deployment: Deployment to check.
        problem: Problem it is checked against.

    Returns:
        Violation descriptions; empty when the deployment is valid.
    """
    app, infra = problem.app, problem.infra
    violations: list[str] = []

    counts: dict[str, int] = {}
    for entry in deployment:
        counts[entry.component] = counts.get(entry.component, 0) + 1
    for component, count in sorted(counts.items()):
        if count > 1:
            violations.append(f"component '{component}' is assigned {count} times")

    placed: dict[str, tuple[Any, Any]] = {}
    for entry in deployment:
        if not app.has_component(entry.component):
            violations.append(f"unknown component '{entry.component}'")
            continue
        component = app.component(entry.component)
        if not component.has_flavour(entry.flavour):
            violations.append(f"component '{entry.component}' has no flavour '{entry.flavour}'")
            continue
        if not infra.has_node(entry.node):
            violations.append(f"{entry.component} is placed on unknown node '{entry.node}'")
            continue
        placed.setdefault(entry.component, (component.flavour(entry.flavour), infra.node(entry.node)))

    for component in app.components:
        if component.mandatory and component.name not in placed:
            violations.append(f"mandatory component '{component.name}' is not deployed")

    needed: set[str] = set()
    for name, (flavour, node) in placed.items():
        for dep in flavour.dependencies:
            needed.add(dep.component)
            if dep.component not in placed:
                violations.append(f"{name}_{flavour.name} needs '{dep.component}', which is not deployed")
                continue
            target_flavour, target_node = placed[dep.component]
            if target_flavour.importance < dep.min_importance:
                violations.append(
                    f"{name}_{flavour.name} needs '{dep.component}' with importance >= "
                    f"{dep.min_importance}, got {target_flavour.name} ({target_flavour.importance})"
                )
            link = infra.link_between(node.name, target_node.name)
            if link is None:
                violations.append(
                    f"no link between {node.name} and {target_node.name} for {name} -> {dep.component}"
                )
                continue
            if dep.max_latency is not None and link.latency > dep.max_latency + EPSILON:
                violations.append(
                    f"latency {link.latency} between {node.name} and {target_node.name} exceeds "
                    f"{dep.max_latency} for {name} -> {dep.component}"
                )
            if dep.min_availability is not None and link.availability < dep.min_availability - EPSILON:
                violations.append(
                    f"availability {link.availability} between {node.name} and {target_node.name} "
                    f"is below {dep.min_availability} for {name} -> {dep.component}"
                )

    for name in placed:
        if not app.component(name).mandatory and name not in needed:
            violations.append(f"optional component '{name}' is deployed in isolation")

    usage: dict[tuple[str, str], float] = {}
    cost = energy_kwh = carbon_g = 0.0
    for name, (flavour, node) in placed.items():
        if not node.available:
            violations.append(f"{name} is placed on unavailable node '{node.name}'")
        if not node.satisfies(flavour.attribute_requirements):
            for attribute, allowed in sorted(flavour.attribute_requirements.items()):
                if node.attributes.get(attribute) not in tuple(allowed):
                    violations.append(
                        f"{name}_{flavour.name} requires {attribute} in {list(allowed)}, "
                        f"{node.name} has {node.attributes.get(attribute)!r}"
                    )
        for resource, quantity in flavour.consumable_demands.items():
            usage[(node.name, resource)] = usage.get((node.name, resource), 0.0) + quantity
            cost += quantity * node.unit_costs.get(resource, 0.0)
        kwh = flavour.energy_profile * problem.horizon_hours / 1000.0
        energy_kwh += kwh
        carbon_g += kwh * node.carbon_intensity

    for (node_name, resource), used in sorted(usage.items()):
        capacity = infra.node(node_name).capacity(resource)
        if used > capacity + EPSILON:
            violations.append(f"{resource} on {node_name} overcommitted: {used:g} > {capacity:g}")

    if cost > app.monetary_budget + EPSILON:
        violations.append(f"cost {cost:g} exceeds the monetary budget {app.monetary_budget:g}")
    if energy_kwh > app.energy_budget + EPSILON:
        violations.append(f"energy {energy_kwh:g} kWh exceeds the energy budget {app.energy_budget:g}")
    if carbon_g > app.carbon_budget + EPSILON:
        violations.append(f"emissions {carbon_g:g} g exceed the carbon budget {app.carbon_budget:g}")

    assignments = {e.component: (e.flavour, e.node) for e in deployment}
    for constraint in problem.hard_soft:
        if not _constraint_holds(constraint, assignments):
            violations.append(f"enforced constraint {constraint.identity} does not hold")

    return violations


def _constraint_holds(constraint: SoftConstraint, assignments: dict[str, tuple[str, str]]) -> bool:
    first = assignments.get(constraint.component)
    if constraint.kind is ConstraintKind.AVOID:
        return first != (constraint.flavour, constraint.target)
    second = assignments.get(constraint.target)
    if first is None or second is None:
        return True
    if first[0] != constraint.flavour or second[0] != constraint.target_flavour:
        return True
    if constraint.kind is ConstraintKind.AFFINITY:
        return first[1] == second[1]
    return first[1] != second[1]


# =============================================================================
# Compiled problem
# =============================================================================


class _Option(NamedTuple):
    """One (flavour, node) value of a component's domain."""

    flavour: str
    node: int
    importance: int
    keep: int
    demand: Any  # NDArray[np.float64] over the resource axis
    cost: float
    energy_kwh: float
    carbon_g: float


class _Requirement(NamedTuple):
    target: int
    min_importance: int
    max_latency: float | None
    min_availability: float | None


@dataclass
class _Compiled:
    """Index-based view of a PlacementProblem shared by solver and oracle."""

    problem: PlacementProblem
    names: list[str]
    mandatory: list[bool]
    domains: list[list[_Option | None]]
    requirements: dict[tuple[int, str], list[_Requirement]]
    node_names: list[str]
    capacity: Any  # NDArray[np.float64], shape (nodes, resources)
    latency: Any
    availability: Any
    pairwise: list[tuple[ConstraintKind, int, str, int, str]] = field(default_factory=list)

    @property
    def size(self) -> int:
        return math.prod(len(domain) for domain in self.domains)

    def link_ok(self, a: int, b: int, req: _Requirement) -> bool:
        latency = self.latency[a, b]
        if math.isnan(latency):
            return False
        if req.max_latency is not None and latency > req.max_latency + EPSILON:
            return False
        if req.min_availability is not None and self.availability[a, b] < req.min_availability - EPSILON:
            return False
        return True

    def deployment(self, values: Sequence[_Option | None]) -> Deployment:
        return Deployment.from_mapping(
            {
                self.names[i]: (value.flavour, self.node_names[value.node])
                for i, value in enumerate(values)
                if value is not None
            }
        )


def _compile(problem: PlacementProblem) -> _Compiled:
    """Build domains in canonical order and the numeric tables."""
    app, infra = problem.app, problem.infra
    components = sorted(app.components, key=lambda c: c.name)
    nodes = list(infra.nodes)
    node_index = {node.name: i for i, node in enumerate(nodes)}

    resources = sorted(
        {r for node in nodes for r in node.consumable_capacities}
        | {r for c in components for f in c.flavours for r in f.consumable_demands}
    )
    capacity: NDArray[np.float64] = np.array(
        [[node.capacity(r) for r in resources] for node in nodes], dtype=np.float64
    ).reshape(len(nodes), len(resources))

    latency = np.full((len(nodes), len(nodes)), np.nan)
    availability = np.zeros((len(nodes), len(nodes)))
    for i in range(len(nodes)):
        latency[i, i] = 0.0
        availability[i, i] = 1.0
    for link in infra.links:
        a, b = link.endpoints
        if a in node_index and b in node_index:
            i, j = node_index[a], node_index[b]
            latency[i, j] = latency[j, i] = link.latency
            availability[i, j] = availability[j, i] = link.availability

    avoided = {
        (c.component, c.flavour, c.target)
        for c in problem.hard_soft
        if c.kind is ConstraintKind.AVOID
    }
    previous = problem.previous.assignments if problem.previous is not None else {}
    keep_counts = problem.objective is ObjectiveMode.MINIMIZE_CHANGES

    names = [c.name for c in components]
    position = {name: i for i, name in enumerate(names)}
    domains: list[list[_Option | None]] = []
    requirements: dict[tuple[int, str], list[_Requirement]] = {}

    for ci, component in enumerate(components):
        options: list[_Option | None] = []
        for flavour in sorted(component.flavours, key=lambda f: f.name):
            requirements[(ci, flavour.name)] = [
                _Requirement(position[d.component], d.min_importance, d.max_latency, d.min_availability)
                for d in flavour.dependencies
                if d.component in position
            ]
            demand = np.array([flavour.demand(r) for r in resources], dtype=np.float64)
            kwh = flavour.energy_profile * problem.horizon_hours / 1000.0
            for node in sorted(nodes, key=lambda n: n.name):
                ni = node_index[node.name]
                if not node.available or not node.satisfies(flavour.attribute_requirements):
                    continue
                if (component.name, flavour.name, node.name) in avoided:
                    continue
                if np.any(demand > capacity[ni] + EPSILON):
                    continue
                cost = sum(q * node.unit_costs.get(r, 0.0) for r, q in flavour.consumable_demands.items())
                carbon = kwh * node.carbon_intensity
                if (
                    cost > app.monetary_budget + EPSILON
                    or kwh > app.energy_budget + EPSILON
                    or carbon > app.carbon_budget + EPSILON
                ):
                    continue
                keep = int(keep_counts and previous.get(component.name) == (flavour.name, node.name))
                options.append(
                    _Option(flavour.name, ni, flavour.importance, keep, demand, cost, kwh, carbon)
                )
        if not component.mandatory:
            options.append(None)
        domains.append(options)

    pairwise = [
        (c.kind, position[c.component], c.flavour, position[c.target], c.target_flavour or "")
        for c in problem.hard_soft
        if c.is_pairwise and c.component in position and c.target in position
    ]
    return _Compiled(
        problem=problem,
        names=names,
        mandatory=[c.mandatory for c in components],
        domains=domains,
        requirements=requirements,
        node_names=[n.name for n in nodes],
        capacity=capacity,
        latency=latency,
        availability=availability,
        pairwise=pairwise,
    )


def allowed_placements(problem: PlacementProblem) -> dict[str, list[tuple[str, str]]]:
    """
    Per component, the (flavour, node) pairs that pass every single-component
    check (attributes, availability, avoid, capacity, budgets) in canonical order.
    """
    compiled = _compile(problem)
    return {
        name: [(o.flavour, compiled.node_names[o.node]) for o in domain if o is not None]
        for name, domain in zip(compiled.names, compiled.domains)
    }


# =============================================================================
# Search
# =============================================================================


class _OutOfTime(Exception):
    pass


class _Search:
    """Depth-first search with incremental consistency checks."""

    def __init__(self, compiled: _Compiled, deadline: float) -> None:
        self.c = compiled
        self.deadline = deadline
        self.explored = 0
        n = len(compiled.names)
        self.values: list[_Option | None] = [None] * n
        self.assigned = [False] * n
        self.usage = np.zeros_like(compiled.capacity)
        self.cost = self.energy = self.carbon = 0.0
        self.kept = self.importance = 0
        self.best_keep = [max((o.keep for o in d if o is not None), default=0) for d in compiled.domains]
        self.best_imp = [max((o.importance for o in d if o is not None), default=0) for d in compiled.domains]
        self.open_keep = sum(self.best_keep)
        self.open_imp = sum(self.best_imp)
        self.minimize_changes = compiled.problem.objective is ObjectiveMode.MINIMIZE_CHANGES
        self.dependents: dict[int, list[int]] = {}
        for (ci, _flavour), reqs in compiled.requirements.items():
            for req in reqs:
                self.dependents.setdefault(req.target, [])
                if ci not in self.dependents[req.target]:
                    self.dependents[req.target].append(ci)

    # -------------------------------------------------------------------------
    # Bookkeeping
    # -------------------------------------------------------------------------

    def bound(self) -> tuple[int, int]:
        return self.kept + self.open_keep, self.importance + self.open_imp

    def score(self) -> tuple[int, int]:
        return self.kept, self.importance

    def tick(self) -> None:
        self.explored += 1
        if self.explored % _CLOCK_INTERVAL == 0 and time.monotonic() > self.deadline:
            raise _OutOfTime

    def assign(self, i: int, value: _Option | None) -> None:
        self.values[i] = value
        self.assigned[i] = True
        self.open_keep -= self.best_keep[i]
        self.open_imp -= self.best_imp[i]
        if value is not None:
            self.usage[value.node] += value.demand
            self.cost += value.cost
            self.energy += value.energy_kwh
            self.carbon += value.carbon_g
            self.kept += value.keep
            self.importance += value.importance

    def unassign(self, i: int) -> None:
        value = self.values[i]
        if value is not None:
            self.usage[value.node] -= value.demand
            self.cost -= value.cost
            self.energy -= value.energy_kwh
            self.carbon -= value.carbon_g
            self.kept -= value.keep
            self.importance -= value.importance
        self.values[i] = None
        self.assigned[i] = False
        self.open_keep += self.best_keep[i]
        self.open_imp += self.best_imp[i]

    # -------------------------------------------------------------------------
    # Consistency
    # -------------------------------------------------------------------------

    def consistent(self, i: int, value: _Option | None) -> bool:
        """Check ``value`` for component ``i`` against the assigned components."""
        c = self.c
        for j in self.dependents.get(i, []):
            if not self.assigned[j] or self.values[j] is None:
                continue
            source = self.values[j]
            assert source is not None
            for req in c.requirements[(j, source.flavour)]:
                if req.target != i:
                    continue
                if value is None or value.importance < req.min_importance:
                    return False
                if not c.link_ok(source.node, value.node, req):
                    return False
        if value is None:
            return True

        if np.any(self.usage[value.node] + value.demand > c.capacity[value.node] + EPSILON):
            return False
        app = c.problem.app
        if self.cost + value.cost > app.monetary_budget + EPSILON:
            return False
        if self.energy + value.energy_kwh > app.energy_budget + EPSILON:
            return False
        if self.carbon + value.carbon_g > app.carbon_budget + EPSILON:
            return False

        for req in c.requirements[(i, value.flavour)]:
            if not self.assigned[req.target]:
                continue
            target = self.values[req.target]
            if target is None or target.importance < req.min_importance:
                return False
            if not c.link_ok(value.node, target.node, req):
                return False

        for kind, a, fa, b, fb in c.pairwise:
            if i == a:
                other, own_flavour, other_flavour = b, fa, fb
            elif i == b:
                other, own_flavour, other_flavour = a, fb, fa
            else:
                continue
            if not self.assigned[other] or value.flavour != own_flavour:
                continue
            partner = self.values[other]
            if partner is None or partner.flavour != other_flavour:
                continue
            same = partner.node == value.node
            if kind is ConstraintKind.AFFINITY and not same:
                return False
            if kind is ConstraintKind.ANTI_AFFINITY and same:
                return False
        return True

    def complete_ok(self) -> bool:
        """Optional components must be needed by some assigned component."""
        needed: set[int] = set()
        for i, value in enumerate(self.values):
            if value is not None:
                needed.update(req.target for req in self.c.requirements[(i, value.flavour)])
        return all(
            self.c.mandatory[i] or value is None or i in needed for i, value in enumerate(self.values)
        )

    # -------------------------------------------------------------------------
    # Phase 1: best objective
    # -------------------------------------------------------------------------

    def optimise(self) -> tuple[tuple[int, int] | None, list[_Option | None] | None]:
        c = self.c
        order = sorted(range(len(c.names)), key=lambda i: (-self.best_imp[i], c.names[i]))
        self.best: tuple[int, int] | None = None
        self.incumbent: list[_Option | None] | None = None
        self._optimise(order, 0)
        return self.best, self.incumbent

    def _optimise(self, order: list[int], depth: int) -> None:
        self.tick()
        if self.best is not None and self.bound() <= self.best:
            return
        if depth == len(order):
            if self.complete_ok():
                self.best = self.score()
                self.incumbent = list(self.values)
                logger.debug("incumbent %s after %d nodes", self.best, self.explored)
            return
        i = order[depth]
        for value in self._value_order(i):
            if self.consistent(i, value):
                self.assign(i, value)
                self._optimise(order, depth + 1)
                self.unassign(i)

    def _value_order(self, i: int) -> list[_Option | None]:
        c = self.c
        with np.errstate(divide="ignore", invalid="ignore"):
            share = np.where(c.capacity > 0, self.usage / c.capacity, 0.0)
        load = share.mean(axis=1) if share.shape[1] else np.zeros(len(c.node_names))

        def key(option: _Option | None) -> tuple:  # type: ignore[type-arg]
            if option is None:
                return (1, 0, 0, 0.0, 0)
            first = -option.keep if self.minimize_changes else 0
            return (0, first, -option.importance, float(load[option.node]), option.node)

        return sorted(c.domains[i], key=key)

    # -------------------------------------------------------------------------
    # Phase 2: canonical tie-break
    # -------------------------------------------------------------------------

    def first_reaching(self, target: tuple[int, int]) -> list[_Option | None] | None:
        self.target = target
        return self._first(0)

    def _first(self, i: int) -> list[_Option | None] | None:
        self.tick()
        if self.bound() < self.target:
            return None
        if i == len(self.c.names):
            if self.score() == self.target and self.complete_ok():
                return list(self.values)
            return None
        for value in self.c.domains[i]:
            if self.consistent(i, value):
                self.assign(i, value)
                found = self._first(i + 1)
                self.unassign(i)
                if found is not None:
                    return found
        return None


def solve(problem: PlacementProblem, time_limit: float = DEFAULT_TIME_LIMIT) -> SolveOutcome:
    """
    Solve a placement problem to optimality.

    Args:
        problem: Problem to solve.
        time_limit: Wall-clock limit in seconds.

    Returns:
        SolveOutcome. ``TIMED_OUT`` carries the incumbent when one was found.

    Raises:
        ValueError: If time_limit is not positive.
    """
    if time_limit <= 0:
        raise ValueError(f"time_limit must be positive, got {time_limit}")
    started = time.monotonic()
    compiled = _compile(problem)

    if any(not domain for domain in compiled.domains):
        empty = [name for name, domain in zip(compiled.names, compiled.domains) if not domain]
        logger.info("unsatisfiable: no admissible placement for %s", ", ".join(empty))
        return SolveOutcome(SolveStatus.UNSATISFIABLE, elapsed=time.monotonic() - started)

    search = _Search(compiled, started + time_limit)
    try:
        best, incumbent = search.optimise()
    except _OutOfTime:
        return _timed_out(compiled, search, started)

    if best is None:
        logger.info("unsatisfiable after %d nodes", search.explored)
        return SolveOutcome(
            SolveStatus.UNSATISFIABLE, elapsed=time.monotonic() - started, explored=search.explored
        )

    try:
        values = search.first_reaching(best)
    except _OutOfTime:
        return _timed_out(compiled, search, started)
    assert values is not None

    deployment = compiled.deployment(values)
    elapsed = time.monotonic() - started
    logger.info(
        "optimal %s objective %d (importance %d) in %.3fs, %d nodes",
        problem.objective.value,
        _primary(best, problem),
        best[1],
        elapsed,
        search.explored,
    )
    return SolveOutcome(
        SolveStatus.OPTIMAL,
        deployment=deployment,
        objective_value=_primary(best, problem),
        importance=best[1],
        elapsed=elapsed,
        explored=search.explored,
    )


def _timed_out(compiled: _Compiled, search: _Search, started: float) -> SolveOutcome:
    incumbent = getattr(search, "incumbent", None)
    best = getattr(search, "best", None)
    logger.info("time limit reached after %d nodes", search.explored)
    if incumbent is None or best is None:
        return SolveOutcome(
            SolveStatus.TIMED_OUT, elapsed=time.monotonic() - started, explored=search.explored
        )
    return SolveOutcome(
        SolveStatus.TIMED_OUT,
        deployment=compiled.deployment(incumbent),
        objective_value=_primary(best, compiled.problem),
        importance=best[1],
        elapsed=time.monotonic() - started,
        explored=search.explored,
    )


# =============================================================================
# Brute-force oracle
# =============================================================================


def brute_force_oracle(
    problem: PlacementProblem, limit: int = ORACLE_CANDIDATE_LIMIT
) -> SolveOutcome:
    """
    Enumerate every candidate deployment and keep the best valid one.

    Candidates are the product of the per-component domains (single-component
    checks applied), walked in canonical order so the first candidate reaching
    a strictly better objective wins ties the same way ``solve`` does. Each
    candidate is judged by ``verify_deployment`` alone.

    Raises:
        OracleSizeError: If the candidate count exceeds ``limit``.
    """
    started = time.monotonic()
    compiled = _compile(problem)
    size = compiled.size
    if size > limit:
        raise OracleSizeError(f"{size} candidates exceed the oracle limit of {limit}")

    best: tuple[int, int] | None = None
    best_values: tuple[_Option | None, ...] | None = None
    explored = 0
    for values in itertools.product(*compiled.domains):
        explored += 1
        score = (
            sum(v.keep for v in values if v is not None),
            sum(v.importance for v in values if v is not None),
        )
        if best is not None and score <= best:
            continue
        if not verify_deployment(compiled.deployment(values), problem):
            best, best_values = score, values

    elapsed = time.monotonic() - started
    if best is None or best_values is None:
        return SolveOutcome(SolveStatus.UNSATISFIABLE, elapsed=elapsed, explored=explored)
    return SolveOutcome(
        SolveStatus.OPTIMAL,
        deployment=compiled.deployment(best_values),
        objective_value=_primary(best, problem),
        importance=best[1],
        elapsed=elapsed,
        explored=explored,
    )


# =============================================================================
# Relaxation
# =============================================================================


def drop_order(soft: Sequence[SoftConstraint], k: int) -> list[tuple[SoftConstraint, ...]]:
    """
    Candidate drop-sets of cardinality ``k``: ascending total weight, then
    lexicographic constraint text.
    """
    ordered = sorted(soft, key=lambda c: c.to_text())
    candidates = list(itertools.combinations(ordered, k))
    return sorted(
        candidates,
        key=lambda combo: (round(sum(c.weight for c in combo), 9), [c.to_text() for c in combo]),
    )


def solve_with_relaxation(
    problem: PlacementProblem,
    soft: Sequence[SoftConstraint],
    time_limit: float = DEFAULT_TIME_LIMIT,
    max_drop_k: int | None = None,
) -> tuple[SolveOutcome, list[SoftConstraint]]:
    """
    Solve with ``soft`` enforced, dropping as few of them as needed.

    Drop-sets are tried by increasing cardinality up to ``max_drop_k``
    (default: all). Within a cardinality the lightest set goes first.

    Args:
        problem: Base problem; its own ``hard_soft`` is replaced by ``soft``.
        soft: Constraints to enforce.
        time_limit: Per-attempt limit in seconds.
        max_drop_k: Largest drop-set cardinality to try.

    Returns:
        (outcome, dropped). A timed-out attempt is returned as is with the
        drop-set it was tried with. When nothing works the outcome is
        unsatisfiable and ``dropped`` is every soft constraint.
    """
    unique: dict[str, SoftConstraint] = {}
    for constraint in soft:
        kept = unique.get(constraint.identity)
        if kept is None or constraint.weight > kept.weight:
            unique[constraint.identity] = constraint
    constraints = list(unique.values())
    limit = len(constraints) if max_drop_k is None else min(max_drop_k, len(constraints))

    for k in range(limit + 1):
        for dropped in drop_order(constraints, k):
            enforced = [c for c in constraints if c not in dropped]
            outcome = solve(problem.with_soft(enforced), time_limit)
            if outcome.status is SolveStatus.UNSATISFIABLE:
                continue
            if dropped:
                logger.info(
                    "relaxed %d constraint(s): %s", k, ", ".join(c.identity for c in dropped)
                )
            return outcome, list(dropped)

    logger.info("no satisfactory deployment after dropping up to %d constraint(s)", limit)
    return SolveOutcome(SolveStatus.UNSATISFIABLE), list(constraints)
