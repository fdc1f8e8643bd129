"""Tests for adaptive_placement.facts module."""

import pytest

from adaptive_placement.errors import LogParseError
from adaptive_placement.facts import (
    Congested,
    Disconnected,
    Overload,
    Race,
    RoundMetrics,
    TimeoutEvent,
    Unreachable,
    coalesce_overloads,
    format_placement_block,
    format_timestamp,
    format_watts,
    parse_simulation_log,
    trace_from_log,
)
from adaptive_placement.model import Assignment, Deployment

SAMPLE_LOG = """\
00:00:00|SIM|Simulation - Round started (seed 0, 3 ticks).
00:00:00|SIM|Simulation - Event Tick-0 fired.
00:00:00|SIM|PlacementManager - {api_large -> n1 | identity_provider_tiny -> n2 |
    web_tiny -> n1}
00:00:00|SIM|Monitor - ENERGY api 25.0 0
00:00:00|SIM|Monitor - INTENSITY n1 300.0 0
00:01:00|SIM|Simulation - Event Tick-1 fired.
00:01:00|SIM|Event - overload n1 cpu 1 150.0%
00:01:00|SIM|Event - race n1 cpu api large web tiny 1
00:01:00|SIM|Event - unreachable api 1
00:01:00|SIM|Event - congested n1 n2 1
00:01:00|SIM|Event - timeout web identity_provider 1
00:01:00|SIM|Monitor - FLOWPOWER web identity_provider 2.0 1
00:02:00|SIM|Simulation - Event Tick-2 fired.
00:02:00|SIM|Event - overload n1 cpu 2
00:02:00|SIM|Event - disconnected n2 2
00:02:00|SIM|Monitor - NODEPOWER n1 35.5 2
"""


class TestParseSimulationLog:
    """Tests for parse_simulation_log()."""

    def test_sample_log(self):
        """Test every event kind lands in the fact base."""
        facts = parse_simulation_log(SAMPLE_LOG)
        assert facts.deployed == {
            Assignment("api", "large", "n1"),
            Assignment("identity_provider", "tiny", "n2"),
            Assignment("web", "tiny", "n1"),
        }
        assert facts.unreachables == {Unreachable("api", 1)}
        assert facts.congestions == {Congested("n1", "n2", 1)}
        assert facts.timeouts == {TimeoutEvent("web", "identity_provider", 1)}
        assert facts.disconnections == {Disconnected("n2", 2)}
        assert facts.races == {Race("n1", "cpu", "api", "large", "web", "tiny", 1)}
        assert facts.overloads == {Overload("n1", "cpu", 1, 2, 150.0)}

    def test_derived_predicates(self):
        """Test the helper predicates over parsed facts."""
        facts = parse_simulation_log(SAMPLE_LOG)
        assert facts.overloaded("n1", "cpu", 2)
        assert facts.overloaded("n1", None, 1)
        assert not facts.overloaded("n1", "cpu", 0)
        assert facts.is_congested("n1", "n2", 1)
        assert not facts.is_congested("n2", "n1", 1)
        assert facts.disconnected_nodes() == {"n2"}
        assert facts.failed_ticks("api") == {1}

    def test_empty_log(self):
        """Test an empty log gives an empty fact base."""
        assert parse_simulation_log("").is_empty()

    def test_last_placement_block_wins(self):
        """Test a later placement snapshot replaces the earlier one."""
        text = (
            "00:00:00|SIM|PlacementManager - {a_x -> n1}\n"
            "00:01:00|SIM|PlacementManager - {a_x -> n2}\n"
        )
        assert parse_simulation_log(text).deployed == {Assignment("a", "x", "n2")}

    @pytest.mark.parametrize(
        "bad_line, message",
        [
            ("no separators here", "HH:MM:SS"),
            ("00:00:00|SIM|nothing to split", "separator"),
            ("00:00:00|SIM|Gossip - hello", "unknown message source"),
            ("00:00:00|SIM|Event - explode n1 3", "unknown event"),
            ("00:00:00|SIM|Event - unreachable api", "takes 2 arguments"),
            ("00:00:00|SIM|Event - unreachable api soon", "tick number"),
            ("00:00:00|SIM|Event - unreachable api -1", "tick must be >= 0"),
            ("00:00:00|SIM|Monitor - ENERGY api lots 3", "expected a number"),
            ("00:00:00|SIM|Monitor - VOLTAGE api 3 3", "unknown monitor sample"),
            ("00:00:00|SIM|PlacementManager - {api -> n1}", "malformed placement entry"),
        ],
    )
    def test_malformed_line_number(self, bad_line, message):
        """Test malformed lines are reported with their 1-based number."""
        text = "00:00:00|SIM|Event - unreachable api 0\n\n" + bad_line + "\n"
        with pytest.raises(LogParseError, match=message) as exc_info:
            parse_simulation_log(text)
        assert exc_info.value.line == 3

    def test_unterminated_block(self):
        """Test a placement block missing its closing brace."""
        text = "00:00:00|SIM|Event - unreachable api 0\n00:00:00|SIM|PlacementManager - {a_x -> n1 |\n"
        with pytest.raises(LogParseError, match="unterminated") as exc_info:
            parse_simulation_log(text)
        assert exc_info.value.line == 2


class TestTraceFromLog:
    """Tests for trace_from_log()."""

    def test_power_samples(self):
        """Test monitor samples are collected by kind."""
        trace = trace_from_log(SAMPLE_LOG)
        assert trace.ticks == 3
        assert trace.power.component == {"api": {0: 25.0}}
        assert trace.power.node == {"n1": {2: 35.5}}
        assert trace.power.flow == {("web", "identity_provider"): {1: 2.0}}
        assert trace.power.intensity_series("n1") == [(0, 300.0)]
        assert trace.metrics is None
        assert trace.deployment.get("web") == ("tiny", "n1")


class TestCoalesceOverloads:
    """Tests for coalesce_overloads()."""

    def test_consecutive_ticks_merge(self):
        """Test consecutive samples form one interval keeping the peak load."""
        samples = [("n", "cpu", t, 100.0 + t) for t in (3, 4, 5)] + [("n", "cpu", 8, 120.0)]
        assert coalesce_overloads(samples) == {
            Overload("n", "cpu", 3, 5, 105.0),
            Overload("n", "cpu", 8, 8, 120.0),
        }

    def test_resources_kept_apart(self):
        """Test each (node, resource) pair is coalesced separately."""
        samples = [("n", "cpu", 1, None), ("n", "ram", 2, 110.0)]
        assert coalesce_overloads(samples) == {
            Overload("n", "cpu", 1, 1, None),
            Overload("n", "ram", 2, 2, 110.0),
        }


class TestFormatting:
    """Tests for log formatting helpers."""

    def test_timestamp(self):
        """Test tick timestamps."""
        assert format_timestamp(0, 1.0) == "00:00:00"
        assert format_timestamp(61, 1.0) == "01:01:00"
        assert format_timestamp(3, 0.5) == "00:01:30"

    def test_placement_block_wraps(self):
        """Test the placement block wraps and parses back."""
        deployment = Deployment.from_mapping({f"c{i}": ("tiny", "n1") for i in range(6)})
        block = format_placement_block(deployment, per_line=4)
        assert len(block) == 2
        assert block[0].startswith("PlacementManager - {c0_tiny -> n1 | ")
        assert block[0].endswith(" |")
        assert block[1].endswith("}")
        text = "00:00:00|SIM|" + block[0] + "\n" + "\n".join(block[1:]) + "\n"
        assert parse_simulation_log(text).deployment == deployment

    def test_watts_round_trip(self):
        """Test formatted watts read back as the same float."""
        value = 163.64744186046512
        assert float(format_watts(value)) == value


class TestRoundMetrics:
    """Tests for RoundMetrics validation."""

    def test_percentage_range(self):
        """Test percentages must lie in [0, 100]."""
        with pytest.raises(ValueError, match="downtime_pct"):
            RoundMetrics(101.0, 50.0, 0.1, 1.0)

    def test_negative_energy(self):
        """Test energy and emissions are non-negative."""
        with pytest.raises(ValueError, match=">= 0"):
            RoundMetrics(0.0, 50.0, -0.1, 1.0)
