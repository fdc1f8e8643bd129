"""Tests for adaptive_placement.solver module."""

import itertools
import random
from dataclasses import replace

import pytest

from adaptive_placement.errors import OracleSizeError, SpecError
from adaptive_placement.model import (
    ApplicationSpec,
    Component,
    Dependency,
    Deployment,
    Flavour,
    InfrastructureSpec,
    Link,
    Node,
    SoftConstraint,
)
from adaptive_placement.solver import (
    ObjectiveMode,
    PlacementProblem,
    SolveStatus,
    allowed_placements,
    brute_force_oracle,
    drop_order,
    objective_of,
    solve,
    solve_with_relaxation,
    verify_deployment,
)

# =============================================================================
# Random instances
# =============================================================================


def random_problem(rng: random.Random, redeploy: bool) -> PlacementProblem:
    """A small random instance the oracle can enumerate quickly."""
    nodes = tuple(
        Node(
            f"n{i}",
            {"cpu": float(rng.choice([2, 4, 6]))},
            {"zone": rng.choice(["a", "b"])},
            {"cpu": 1.0},
            rng.choice([100.0, 400.0]),
            available=rng.random() > 0.1,
        )
        for i in range(rng.randint(1, 3))
    )
    links = tuple(
        Link((a.name, b.name), latency=rng.choice([1.0, 5.0, 10.0]), availability=rng.choice([0.9, 0.99]))
        for a, b in itertools.combinations(nodes, 2)
        if rng.random() < 0.7
    )
    names = [f"c{i}" for i in range(rng.randint(1, 3))]
    components = []
    for name in names:
        flavours = []
        for importance in range(1, rng.randint(1, 2) + 1):
            dependencies = tuple(
                Dependency(
                    other,
                    min_importance=rng.choice([1, 1, 2]),
                    max_latency=rng.choice([None, 2.0, 10.0]),
                    min_availability=rng.choice([None, None, 0.95]),
                )
                for other in names
                if other != name and rng.random() < 0.3
            )
            requirements = {"zone": (rng.choice(["a", "b"]),)} if rng.random() < 0.3 else {}
            flavours.append(
                Flavour(
                    f"f{importance}",
                    importance,
                    {"cpu": float(rng.choice([1, 2, 3]))},
                    requirements,
                    dependencies,
                    rng.choice([5.0, 50.0]),
                )
            )
        components.append(Component(name, tuple(flavours), mandatory=rng.random() > 0.3))
    app = ApplicationSpec(
        "random",
        tuple(components),
        monetary_budget=rng.choice([5.0, 100.0]),
        carbon_budget=rng.choice([50.0, 10000.0]),
        energy_budget=10.0,
    )
    infra = InfrastructureSpec(nodes, links)

    soft = []
    if rng.random() < 0.5:
        component = rng.choice(components)
        soft.append(SoftConstraint.avoid(component.name, rng.choice(component.flavours).name, rng.choice(nodes).name))
    if len(components) > 1 and rng.random() < 0.5:
        a, b = rng.sample(components, 2)
        make = rng.choice([SoftConstraint.affinity, SoftConstraint.anti_affinity])
        soft.append(make(a.name, rng.choice(a.flavours).name, b.name, rng.choice(b.flavours).name))

    previous = None
    if redeploy:
        previous = Deployment.from_mapping(
            {
                c.name: (rng.choice(c.flavours).name, rng.choice(nodes).name)
                for c in components
                if rng.random() < 0.8
            }
        )
    return PlacementProblem(
        app,
        infra,
        hard_soft=tuple(soft),
        previous=previous,
        objective=ObjectiveMode.MINIMIZE_CHANGES if redeploy else ObjectiveMode.MAXIMIZE_IMPORTANCE,
    )


# =============================================================================
# Tests
# =============================================================================


class TestFirstDeployment:
    """Tests for the importance-maximising objective on the case study."""

    def test_case_study_optimum(self, case_app, case_infra, round_zero):
        """Test the first deployment of the case study."""
        outcome = solve(PlacementProblem(case_app, case_infra))
        assert outcome.status is SolveStatus.OPTIMAL
        assert outcome.objective_value == 21
        assert outcome.importance == 21
        assert outcome.deployment == round_zero

    def test_deterministic(self, case_app, case_infra):
        """Test two solves return the same deployment."""
        problem = PlacementProblem(case_app, case_infra)
        assert solve(problem).deployment == solve(problem).deployment

    def test_result_is_valid(self, case_app, case_infra):
        """Test the optimum passes verification."""
        problem = PlacementProblem(case_app, case_infra)
        assert verify_deployment(solve(problem).deployment, problem) == []

    def test_latency_bound_forces_colocation(self, tiny_app, tiny_infra):
        """Test a tight latency bound puts web next to its database."""
        web = tiny_app.component("web")
        tight = tuple(
            replace(f, dependencies=(Dependency("db", max_latency=1.0),)) for f in web.flavours
        )
        app = replace(tiny_app, components=(replace(web, flavours=tight), tiny_app.component("db")))
        outcome = solve(PlacementProblem(app, tiny_infra))
        assert outcome.deployment.get("web") == ("large", "n2")
        assert outcome.deployment.get("db") == ("std", "n2")

    def test_unsatisfiable_attributes(self, case_app, case_infra):
        """Test no node offering encrypted storage makes the case unsatisfiable."""
        infra = case_infra.without_node("private1").without_node("private5")
        outcome = solve(PlacementProblem(case_app, infra))
        assert outcome.status is SolveStatus.UNSATISFIABLE
        assert outcome.deployment is None

    def test_unsatisfiable_budget(self, case_app, case_infra):
        """Test a monetary budget below the cheapest deployment."""
        outcome = solve(PlacementProblem(replace(case_app, monetary_budget=1.0), case_infra))
        assert outcome.status is SolveStatus.UNSATISFIABLE

    def test_unavailable_node_not_used(self, case_app, case_infra):
        """Test unavailable nodes host nothing."""
        infra = case_infra.with_unavailable({"public1"})
        outcome = solve(PlacementProblem(case_app, infra))
        assert outcome.status is SolveStatus.OPTIMAL
        assert outcome.deployment.components_on("public1") == []

    def test_invalid_time_limit(self, case_app, case_infra):
        """Test the time limit must be positive."""
        with pytest.raises(ValueError, match="time_limit must be positive"):
            solve(PlacementProblem(case_app, case_infra), time_limit=0)


class TestRedeployment:
    """Tests for the change-minimising objective."""

    def test_avoids_move_two_components(self, case_app, case_infra, round_zero):
        """Test avoiding public1 for the front tier moves exactly those two."""
        soft = (
            SoftConstraint.avoid("frontend", "large", "public1"),
            SoftConstraint.avoid("load_balancer", "large", "public1"),
        )
        problem = PlacementProblem(
            case_app,
            case_infra,
            hard_soft=soft,
            previous=round_zero,
            objective=ObjectiveMode.MINIMIZE_CHANGES,
        )
        outcome = solve(problem)
        assert outcome.objective_value == 5
        assert outcome.deployment.get("frontend") == ("large", "public2")
        assert outcome.deployment.get("load_balancer") == ("large", "public2")
        assert outcome.deployment.changes_from(round_zero) == 2

    def test_removed_node(self, case_app, case_infra, round_zero):
        """Test losing private3 moves only the two components it hosted."""
        problem = PlacementProblem(
            case_app,
            case_infra.without_node("private3"),
            previous=round_zero,
            objective=ObjectiveMode.MINIMIZE_CHANGES,
        )
        outcome = solve(problem)
        assert outcome.status is SolveStatus.OPTIMAL
        assert outcome.objective_value == 5
        moved = {
            a.component for a in outcome.deployment if round_zero.get(a.component) != (a.flavour, a.node)
        }
        assert moved == {"redis", "identity_provider"}
        assert outcome.importance == 21

    def test_nothing_to_change(self, case_app, case_infra, round_zero):
        """Test an unchanged world keeps the whole deployment."""
        problem = PlacementProblem(
            case_app, case_infra, previous=round_zero, objective=ObjectiveMode.MINIMIZE_CHANGES
        )
        outcome = solve(problem)
        assert outcome.deployment == round_zero
        assert outcome.objective_value == 7

    def test_requires_previous(self, case_app, case_infra):
        """Test the redeploy objective needs a previous deployment."""
        with pytest.raises(ValueError, match="previous deployment"):
            PlacementProblem(case_app, case_infra, objective=ObjectiveMode.MINIMIZE_CHANGES)


class TestProblemValidation:
    """Tests for PlacementProblem reference checks."""

    def test_unknown_node(self, case_app, case_infra):
        """Test an avoid naming an unknown node is rejected."""
        with pytest.raises(SpecError, match="unknown node 'ghost'"):
            PlacementProblem(case_app, case_infra, hard_soft=(SoftConstraint.avoid("api", "large", "ghost"),))

    def test_unknown_flavour(self, case_app, case_infra):
        """Test a constraint naming an unknown flavour is rejected."""
        with pytest.raises(SpecError, match="unknown flavour 'huge'"):
            PlacementProblem(
                case_app,
                case_infra,
                hard_soft=(SoftConstraint.affinity("api", "huge", "redis", "large"),),
            )

    def test_non_positive_horizon(self, case_app, case_infra):
        """Test the projection horizon must be positive."""
        with pytest.raises(ValueError, match="horizon_hours"):
            PlacementProblem(case_app, case_infra, horizon_hours=0)


class TestVerifyDeployment:
    """Tests for verify_deployment()."""

    def test_reports_each_violation(self, tiny_app, tiny_infra):
        """Test overcommitment, attributes and missing mandatory components."""
        problem = PlacementProblem(tiny_app, tiny_infra)
        deployment = Deployment.from_mapping({"web": ("large", "n1")})
        violations = verify_deployment(deployment, problem)
        assert "mandatory component 'db' is not deployed" in violations
        assert any("needs 'db'" in v for v in violations)

        bad = Deployment.from_mapping({"web": ("large", "n1"), "db": ("std", "n1")})
        violations = verify_deployment(bad, problem)
        assert any("cpu on n1 overcommitted" in v for v in violations)
        assert any("requires disk in ['ssd']" in v for v in violations)

    def test_duplicate_and_unknown(self, tiny_app, tiny_infra):
        """Test duplicate components and unknown names."""
        problem = PlacementProblem(tiny_app, tiny_infra)
        deployment = Deployment(
            (("web", "tiny", "n1"), ("web", "tiny", "n2"), ("db", "std", "n9"), ("ghost", "x", "n1"))
        )
        violations = verify_deployment(deployment, problem)
        assert "component 'web' is assigned 2 times" in violations
        assert "unknown component 'ghost'" in violations
        assert "db is placed on unknown node 'n9'" in violations

    def test_enforced_constraint(self, tiny_app, tiny_infra):
        """Test soft constraints enforced as hard are checked."""
        problem = PlacementProblem(
            tiny_app, tiny_infra, hard_soft=(SoftConstraint.anti_affinity("web", "tiny", "db", "std"),)
        )
        deployment = Deployment.from_mapping({"web": ("tiny", "n2"), "db": ("std", "n2")})
        assert verify_deployment(deployment, problem) == [
            "enforced constraint antiaffinity(db,std,web,tiny) does not hold"
        ]

    def test_optional_in_isolation(self, tiny_app, tiny_infra):
        """Test an optional component nobody uses may not be deployed."""
        extra = Component("cache", (Flavour("std", 1, {"cpu": 0.0}),), mandatory=False)
        app = replace(tiny_app, components=tiny_app.components + (extra,))
        problem = PlacementProblem(app, tiny_infra)
        deployment = Deployment.from_mapping(
            {"web": ("tiny", "n1"), "db": ("std", "n2"), "cache": ("std", "n1")}
        )
        assert verify_deployment(deployment, problem) == ["optional component 'cache' is deployed in isolation"]

    def test_objective_of(self, tiny_app, tiny_infra):
        """Test (kept, importance) scoring."""
        previous = Deployment.from_mapping({"web": ("tiny", "n1"), "db": ("std", "n2")})
        problem = PlacementProblem(
            tiny_app, tiny_infra, previous=previous, objective=ObjectiveMode.MINIMIZE_CHANGES
        )
        current = Deployment.from_mapping({"web": ("large", "n1"), "db": ("std", "n2")})
        assert objective_of(current, problem) == (1, 3)


class TestOracle:
    """Tests for brute_force_oracle() and its agreement with solve()."""

    @pytest.mark.parametrize("redeploy", [False, True])
    def test_random_instances_agree(self, redeploy):
        """Test the solver and the oracle agree on 200 random instances."""
        rng = random.Random(20240917 + int(redeploy))
        for _ in range(200):
            problem = random_problem(rng, redeploy)
            expected = brute_force_oracle(problem)
            actual = solve(problem)
            assert actual.status is expected.status
            assert actual.objective_value == expected.objective_value
            assert actual.importance == expected.importance
            if actual.deployment is not None:
                assert verify_deployment(actual.deployment, problem) == []

    def test_case_study(self, case_app, case_infra):
        """Test the oracle reaches the same optimum on the case study."""
        outcome = brute_force_oracle(PlacementProblem(case_app, case_infra))
        assert outcome.objective_value == 21

    def test_size_limit(self, case_app, case_infra):
        """Test the oracle refuses oversized enumerations."""
        with pytest.raises(OracleSizeError, match="exceed the oracle limit"):
            brute_force_oracle(PlacementProblem(case_app, case_infra), limit=10)

    def test_allowed_placements(self, tiny_app, tiny_infra):
        """Test single-component filtering in canonical order."""
        domains = allowed_placements(PlacementProblem(tiny_app, tiny_infra))
        assert domains["db"] == [("std", "n2")]
        assert domains["web"] == [("large", "n1"), ("large", "n2"), ("tiny", "n1"), ("tiny", "n2")]


class TestRelaxation:
    """Tests for solve_with_relaxation() and drop_order()."""

    def test_no_drop_when_feasible(self, tiny_app, tiny_infra):
        """Test feasible constraint sets are kept whole."""
        soft = [SoftConstraint.avoid("web", "large", "n1")]
        outcome, dropped = solve_with_relaxation(PlacementProblem(tiny_app, tiny_infra), soft)
        assert dropped == []
        assert outcome.deployment.get("web") == ("large", "n2")

    def test_drops_lightest(self, tiny_app, tiny_infra):
        """Test the lighter of two incompatible constraints is dropped."""
        soft = [
            SoftConstraint.avoid("db", "std", "n2", weight=0.3),
            SoftConstraint.avoid("web", "large", "n1", weight=0.6),
        ]
        outcome, dropped = solve_with_relaxation(PlacementProblem(tiny_app, tiny_infra), soft)
        assert dropped == [soft[0]]
        assert outcome.status is SolveStatus.OPTIMAL

    def test_unsatisfiable_drops_everything(self, case_app, case_infra):
        """Test an infeasible base problem reports every constraint dropped."""
        infra = case_infra.without_node("private1").without_node("private5")
        soft = [SoftConstraint.avoid("api", "large", "private3")]
        outcome, dropped = solve_with_relaxation(PlacementProblem(case_app, infra), soft)
        assert outcome.status is SolveStatus.UNSATISFIABLE
        assert dropped == soft

    def test_duplicates_keep_heaviest(self, tiny_app, tiny_infra):
        """Test duplicate constraints collapse to the heaviest one."""
        soft = [
            SoftConstraint.avoid("db", "std", "n2", weight=0.2),
            SoftConstraint.avoid("db", "std", "n2", weight=0.9),
        ]
        _outcome, dropped = solve_with_relaxation(PlacementProblem(tiny_app, tiny_infra), soft)
        assert [c.weight for c in dropped] == [0.9]

    def test_max_drop_k(self, tiny_app, tiny_infra):
        """Test a zero drop budget gives up immediately."""
        soft = [SoftConstraint.avoid("db", "std", "n2")]
        outcome, _dropped = solve_with_relaxation(PlacementProblem(tiny_app, tiny_infra), soft, max_drop_k=0)
        assert outcome.status is SolveStatus.UNSATISFIABLE

    def test_drop_order(self):
        """Test drop-sets come lightest first, then by text."""
        a = SoftConstraint.avoid("a", "x", "n", weight=0.5)
        b = SoftConstraint.avoid("b", "x", "n", weight=0.2)
        c = SoftConstraint.avoid("c", "x", "n", weight=0.2)
        assert drop_order([a, b, c], 1) == [(b,), (c,), (a,)]
        assert drop_order([a, b, c], 2)[0] == (b, c)

    def test_minimal_drop_sets(self):
        """Test relaxation drops a minimum-cardinality, minimum-weight set."""
        rng = random.Random(7)
        for _ in range(60):
            base = random_problem(rng, redeploy=False).with_soft(())
            components = base.app.components
            pool = {}
            for _ in range(4):
                component = rng.choice(components)
                flavour = rng.choice(component.flavours).name
                node = rng.choice(base.infra.nodes).name
                c = SoftConstraint.avoid(component.name, flavour, node, weight=rng.choice([0.2, 0.5, 0.9, 1.0]))
                pool.setdefault(c.identity, c)
            soft = list(pool.values())

            best = None
            for k in range(len(soft) + 1):
                for drop in itertools.combinations(soft, k):
                    kept = [c for c in soft if c not in drop]
                    if brute_force_oracle(base.with_soft(kept)).status is SolveStatus.OPTIMAL:
                        weight = round(sum(c.weight for c in drop), 9)
                        best = weight if best is None else min(best, weight)
                if best is not None:
                    break

            outcome, dropped = solve_with_relaxation(base, soft)
            if best is None:
                assert outcome.status is SolveStatus.UNSATISFIABLE
                continue
            assert outcome.status is SolveStatus.OPTIMAL
            assert len(dropped) == k
            assert round(sum(c.weight for c in dropped), 9) == best
