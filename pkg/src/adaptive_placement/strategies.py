"""
Placement strategies.

A strategy turns an application and an infrastructure into a deployment.
Three are built in:

    - solver: the exact solver with soft-constraint relaxation
    - first-fit: each component on the first node with spare capacity
    - best-fit: each component on the node left most utilised

The two bin-packing baselines place components in declaration order, each in
its most important flavour (falling back to smaller ones only when the
largest fits nowhere). They respect consumable capacities and node
availability but ignore attribute requirements, dependencies and links.

Design Patterns:
    - Strategy Pattern: each implementation subclasses PlacementStrategy
    - Factory Pattern: create_strategy() instantiates by name

Example:
    >>> strategy = create_strategy("best-fit")
    >>> deployment = strategy.place(app, infra)
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import Callable, Sequence

import numpy as np

from adaptive_placement.errors import NoDeploymentError
from adaptive_placement.model import ApplicationSpec, Deployment, InfrastructureSpec, SoftConstraint
from adaptive_placement.solver import (
    DEFAULT_HORIZON_HOURS,
    DEFAULT_TIME_LIMIT,
    EPSILON,
    ObjectiveMode,
    PlacementProblem,
    SolveOutcome,
    SolveStatus,
    solve_with_relaxation,
)

logger = logging.getLogger(__name__)


# =============================================================================
# Bin-packing baselines
# =============================================================================


class _Capacities:
    """Remaining capacity table over the union of resource names."""

    def __init__(self, app: ApplicationSpec, infra: InfrastructureSpec) -> None:
        self.nodes = [node for node in infra.nodes if node.available]
        self.resources = sorted(
            {r for node in self.nodes for r in node.consumable_capacities}
            | {r for c in app.components for f in c.flavours for r in f.consumable_demands}
        )
        self.capacity = np.array(
            [[node.capacity(r) for r in self.resources] for node in self.nodes], dtype=np.float64
        ).reshape(len(self.nodes), len(self.resources))
        self.used = np.zeros_like(self.capacity)

    def demand(self, demands: dict[str, float]) -> np.ndarray:
        return np.array([demands.get(r, 0.0) for r in self.resources], dtype=np.float64)

    def fits(self, index: int, demand: np.ndarray) -> bool:
        return bool(np.all(self.used[index] + demand <= self.capacity[index] + EPSILON))

    def utilisation_after(self, index: int, demand: np.ndarray) -> float:
        """Mean used/capacity over the node's positive-capacity resources."""
        capacity = self.capacity[index]
        positive = capacity > 0
        if not np.any(positive):
            return 0.0
        return float(np.mean((self.used[index][positive] + demand[positive]) / capacity[positive]))


def _pack(
    app: ApplicationSpec,
    infra: InfrastructureSpec,
    choose: Callable[[_Capacities, np.ndarray], int | None],
) -> Deployment:
    table = _Capacities(app, infra)
    placed: dict[str, tuple[str, str]] = {}
    for component in app.components:
        for flavour in component.flavours_by_importance:
            demand = table.demand(dict(flavour.consumable_demands))
            index = choose(table, demand)
            if index is not None:
                table.used[index] += demand
                placed[component.name] = (flavour.name, table.nodes[index].name)
                break
        else:
            logger.info("no node can host any flavour of '%s'; left undeployed", component.name)
    return Deployment.from_mapping(placed)


def first_fit(app: ApplicationSpec, infra: InfrastructureSpec) -> Deployment:
    """
    Place every component on the first node (declaration order) that fits it.

    Args:
        app: Application specification.
        infra: Infrastructure specification.

    Returns:
        Deployment; components that fit nowhere are left out.
    """

    def choose(table: _Capacities, demand: np.ndarray) -> int | None:
        for index in range(len(table.nodes)):
            if table.fits(index, demand):
                return index
        return None

    return _pack(app, infra, choose)


def best_fit(app: ApplicationSpec, infra: InfrastructureSpec) -> Deployment:
    """
    Place every component on the node with the highest utilisation after
    placement; ties go to the earlier node.
    """

    def choose(table: _Capacities, demand: np.ndarray) -> int | None:
        best: int | None = None
        best_score = -1.0
        for index in range(len(table.nodes)):
            if not table.fits(index, demand):
                continue
            score = table.utilisation_after(index, demand)
            if score > best_score + EPSILON:
                best, best_score = index, score
        return best

    return _pack(app, infra, choose)


# =============================================================================
# Strategy interface
# =============================================================================


class PlacementStrategy(ABC):
    """
    Abstract base class for placement strategies.

    Subclasses must implement:
        - name: Property returning the strategy identifier
        - place: Compute a deployment
    """

    @property
    @abstractmethod
    def name(self) -> str:
        pass

    @abstractmethod
    def place(
        self,
        app: ApplicationSpec,
        infra: InfrastructureSpec,
        previous: Deployment | None = None,
        soft: Sequence[SoftConstraint] = (),
    ) -> Deployment:
        """
        Compute a deployment.

        Args:
            app: Application specification.
            infra: Infrastructure specification.
            previous: Deployment of the previous round, if any.
            soft: Soft constraints to honour where the strategy supports them.

        Returns:
            The new deployment.
        """
        pass


class FirstFitStrategy(PlacementStrategy):
    @property
    def name(self) -> str:
        return "first-fit"

    def place(
        self,
        app: ApplicationSpec,
        infra: InfrastructureSpec,
        previous: Deployment | None = None,
        soft: Sequence[SoftConstraint] = (),
    ) -> Deployment:
        return first_fit(app, infra)


class BestFitStrategy(PlacementStrategy):
    @property
    def name(self) -> str:
        return "best-fit"

    def place(
        self,
        app: ApplicationSpec,
        infra: InfrastructureSpec,
        previous: Deployment | None = None,
        soft: Sequence[SoftConstraint] = (),
    ) -> Deployment:
        return best_fit(app, infra)


class SolverStrategy(PlacementStrategy):
    """
    Exact solver with relaxation.

    The first call (no previous deployment, or an empty one) maximises
    importance; later calls minimise changes. The most recent outcome and
    dropped constraints are kept on the instance for reporting.
    """

    def __init__(
        self,
        time_limit: float = DEFAULT_TIME_LIMIT,
        max_drop_k: int | None = None,
        horizon_hours: float = DEFAULT_HORIZON_HOURS,
    ) -> None:
        self.time_limit = time_limit
        self.max_drop_k = max_drop_k
        self.horizon_hours = horizon_hours
        self.last_outcome: SolveOutcome | None = None
        self.last_dropped: list[SoftConstraint] = []

    @property
    def name(self) -> str:
        return "solver"

    def place(
        self,
        app: ApplicationSpec,
        infra: InfrastructureSpec,
        previous: Deployment | None = None,
        soft: Sequence[SoftConstraint] = (),
    ) -> Deployment:
        """
        Raises:
            NoDeploymentError: If no deployment exists after relaxation, or
                the time limit passed without an incumbent.
        """
        objective = (
            ObjectiveMode.MINIMIZE_CHANGES if previous is not None else ObjectiveMode.MAXIMIZE_IMPORTANCE
        )
        problem = PlacementProblem(
            app, infra, previous=previous, objective=objective, horizon_hours=self.horizon_hours
        )
        outcome, dropped = solve_with_relaxation(problem, soft, self.time_limit, self.max_drop_k)
        self.last_outcome, self.last_dropped = outcome, dropped
        if outcome.status is SolveStatus.UNSATISFIABLE:
            raise NoDeploymentError("no satisfactory deployment exists")
        if outcome.deployment is None:
            raise NoDeploymentError("time limit reached without a deployment", timed_out=True)
        return outcome.deployment


# =============================================================================
# Factory Functions
# =============================================================================

_STRATEGIES: dict[str, type[PlacementStrategy]] = {
    "solver": SolverStrategy,
    "first-fit": FirstFitStrategy,
    "best-fit": BestFitStrategy,
}


def get_available_strategies() -> list[str]:
    """Return the names accepted by create_strategy()."""
    return list(_STRATEGIES)


def create_strategy(name: str = "solver", **options: object) -> PlacementStrategy:
    """
    Create a placement strategy by name.

    Args:
        name: One of get_available_strategies().
        **options: Constructor options (only the solver takes any:
            time_limit, max_drop_k, horizon_hours).

    Raises:
        ValueError: If the name is unknown.
    """
    strategy_class = _STRATEGIES.get(name)
    if strategy_class is None:
        raise ValueError(f"Unknown strategy: {name}. Available strategies: {get_available_strategies()}")
    if options and strategy_class is not SolverStrategy:
        raise ValueError(f"Strategy '{name}' takes no options")
    return strategy_class(**options)  # type: ignore[arg-type]
