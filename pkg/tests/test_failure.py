"""Tests for adaptive_placement.failure module."""

from adaptive_placement.facts import (
    Congested,
    Disconnected,
    FactBase,
    Overload,
    Race,
    TimeoutEvent,
    Unreachable,
)
from adaptive_placement.failure import FailureEnhancer, suggest
from adaptive_placement.model import Assignment, Deployment, Provenance, SoftConstraint
from adaptive_placement.simulator import Constant, Scenario, run_round

DEPLOYED = {
    Assignment("web", "tiny", "n1"),
    Assignment("api", "large", "n2"),
    Assignment("cache", "std", "n1"),
}


def facts(**events) -> FactBase:
    return FactBase(deployed=set(DEPLOYED), **events)


class TestTimeoutRules:
    """Tests for the rules triggered by timeouts."""

    def test_colocate_on_plain_timeout(self):
        """Test a timeout over a healthy link suggests an affinity."""
        result = suggest(facts(timeouts={TimeoutEvent("web", "api", 4)}))
        assert result == {SoftConstraint.affinity("web", "tiny", "api", "large")}

    def test_avoid_caller_node_when_congested(self):
        """Test congestion from the caller side suggests avoiding the caller's node."""
        result = suggest(
            facts(timeouts={TimeoutEvent("web", "api", 4)}, congestions={Congested("n1", "n2", 4)})
        )
        assert result == {SoftConstraint.avoid("web", "tiny", "n1")}

    def test_avoid_callee_node_when_disconnected(self):
        """Test a disconnected callee node suggests avoiding it for the callee."""
        result = suggest(
            facts(timeouts={TimeoutEvent("web", "api", 4)}, disconnections={Disconnected("n2", 4)})
        )
        assert SoftConstraint.avoid("api", "large", "n2") in result
        assert SoftConstraint.affinity("web", "tiny", "api", "large") not in result

    def test_congestion_at_other_tick_ignored(self):
        """Test congestion only counts at the timeout's tick."""
        result = suggest(
            facts(timeouts={TimeoutEvent("web", "api", 4)}, congestions={Congested("n1", "n2", 5)})
        )
        assert result == {SoftConstraint.affinity("web", "tiny", "api", "large")}

    def test_same_node_timeout_ignored(self):
        """Test timeouts between co-located components suggest nothing."""
        assert suggest(facts(timeouts={TimeoutEvent("web", "cache", 4)})) == set()

    def test_unknown_component_ignored(self):
        """Test timeouts naming undeployed components suggest nothing."""
        assert suggest(facts(timeouts={TimeoutEvent("web", "ghost", 4)})) == set()


class TestFailureRules:
    """Tests for the rules triggered by unreachable or internal failures."""

    def test_separate_racing_components(self):
        """Test a race on an overloaded resource suggests an anti-affinity."""
        result = suggest(
            facts(
                unreachables={Unreachable("web", 7)},
                overloads={Overload("n1", "cpu", 6, 8, 130.0)},
                races={Race("n1", "cpu", "web", "tiny", "cache", "std", 7)},
            )
        )
        assert result == {SoftConstraint.anti_affinity("web", "tiny", "cache", "std")}

    def test_avoid_overloaded_node_without_race(self):
        """Test an overload with no race suggests avoiding the node."""
        result = suggest(
            facts(unreachables={Unreachable("web", 7)}, overloads={Overload("n1", "ram", 7, 7, None)})
        )
        assert result == {SoftConstraint.avoid("web", "tiny", "n1")}

    def test_failure_outside_overload(self):
        """Test failures outside any overload interval suggest nothing."""
        result = suggest(
            facts(unreachables={Unreachable("web", 9)}, overloads={Overload("n1", "cpu", 6, 8, 130.0)})
        )
        assert result == set()

    def test_avoid_disconnected_node(self):
        """Test a failure on a disconnected node suggests avoiding it."""
        result = suggest(
            facts(unreachables={Unreachable("api", 3)}, disconnections={Disconnected("n2", 3)})
        )
        assert result == {SoftConstraint.avoid("api", "large", "n2")}

    def test_many_ticks_one_constraint(self):
        """Test a rule firing at many ticks yields one constraint."""
        result = suggest(
            facts(
                unreachables={Unreachable("web", t) for t in range(10)},
                overloads={Overload("n1", "cpu", 0, 9, 150.0)},
            )
        )
        assert len(result) == 1

    def test_empty_facts(self):
        """Test an empty fact base suggests nothing."""
        assert FailureEnhancer(FactBase()).run() == set()


class TestRoundReplay:
    """Tests running the enhancer on a simulated round."""

    def test_degraded_front_node(self, case_app, case_infra, round_zero, scenario_library):
        """Test a degraded public1 yields exactly the two front-tier avoids."""
        scenarios = list(scenario_library["degrade_public1"]) + list(scenario_library["database_spike"])
        trace = run_round(round_zero, case_app, case_infra, scenarios)
        result = suggest(trace.facts)
        assert result == {
            SoftConstraint.avoid("frontend", "large", "public1"),
            SoftConstraint.avoid("load_balancer", "large", "public1"),
        }
        assert all(c.provenance is Provenance.FAILURE for c in result)

    def test_quiet_round(self, case_app, case_infra, round_zero):
        """Test an undisturbed round suggests nothing."""
        trace = run_round(round_zero, case_app, case_infra)
        assert suggest(trace.facts) == set()

    def test_crowded_node_without_race(self, crowded_app, crowded_infra):
        """Test an overload no pair causes suggests avoids, not anti-affinities."""
        deployment = Deployment.from_mapping({name: ("large", "n1") for name in "abc"})
        scenarios = [Scenario("node", "n1", "cpu", Constant(-300, 0, 0))]
        trace = run_round(deployment, crowded_app, crowded_infra, scenarios, ticks=2)
        assert suggest(trace.facts) == {SoftConstraint.avoid(name, "large", "n1") for name in "abc"}
