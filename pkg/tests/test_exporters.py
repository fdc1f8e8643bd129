"""Tests for adaptive_placement.exporters module."""

import random

import pytest

from adaptive_placement.errors import ConstraintParseError, SpecError
from adaptive_placement.exporters import (
    METRIC_COLUMNS,
    dump_model,
    emit_constraints,
    emit_deployment,
    emit_dropped,
    format_metrics_csv,
    load_constraints,
    load_deployment,
    metrics_frame,
    parse_constraints,
    parse_deployment,
    read_metrics_csv,
    save_constraints,
    save_deployment,
    write_metrics_csv,
)
from adaptive_placement.model import Deployment, Provenance, SoftConstraint
from adaptive_placement.solver import PlacementProblem

CONSTRAINT_TEXT = """\
% proposed after round 0
avoid(d(frontend,large),public1).
affinity(redis,large,api,large).
antiaffinity(frontend,large,load_balancer,large, 0.25).

avoid(d(database,large),private1,1.0).
"""


class TestDeployments:
    """Tests for the deployment file format."""

    def test_emit_sorted(self):
        """Test deployments are written one sorted line per component."""
        deployment = Deployment.from_mapping({"web": ("tiny", "n1"), "db": ("std", "n2")})
        assert emit_deployment(deployment) == "db std n2\nweb tiny n1\n"

    def test_parse_skips_comments(self):
        """Test blank and comment lines are ignored."""
        deployment = parse_deployment("% round 0\n\ndb std n2\n  web tiny n1  \n")
        assert deployment.get("web") == ("tiny", "n1")
        assert len(deployment) == 2

    def test_parse_error_line(self):
        """Test a malformed line is reported with its number."""
        with pytest.raises(SpecError, match="expected 'component flavour node'") as exc_info:
            parse_deployment("db std n2\nweb tiny\n")
        assert exc_info.value.line == 2

    def test_file_round_trip(self, tmp_path, round_zero):
        """Test saving and loading a deployment file."""
        path = tmp_path / "deployment.txt"
        save_deployment(round_zero, path)
        assert load_deployment(path) == round_zero


class TestConstraints:
    """Tests for the constraint file format."""

    def test_parse(self):
        """Test every functor kind and optional weights."""
        constraints = parse_constraints(CONSTRAINT_TEXT)
        assert constraints == [
            SoftConstraint.avoid("frontend", "large", "public1"),
            SoftConstraint.affinity("api", "large", "redis", "large"),
            SoftConstraint.anti_affinity("frontend", "large", "load_balancer", "large", weight=0.25),
            SoftConstraint.avoid("database", "large", "private1"),
        ]

    def test_provenance_applied(self):
        """Test parsed constraints take the requested provenance."""
        constraints = parse_constraints(CONSTRAINT_TEXT, Provenance.ENERGY)
        assert {c.provenance for c in constraints} == {Provenance.ENERGY}

    def test_emit(self):
        """Test a weight of 1.0 is left implicit."""
        text = emit_constraints(
            [SoftConstraint.avoid("a", "f", "n"), SoftConstraint.avoid("b", "f", "n", weight=0.5)]
        )
        assert text == "avoid(d(a,f),n).\navoid(d(b,f),n,0.5).\n"

    @pytest.mark.parametrize("seed", range(5))
    def test_weights_survive_text(self, seed):
        """Test any weight in (0, 1] parses back exactly."""
        rng = random.Random(seed)
        weights = [0.0004, 0.12345, 0.9996, 1e-12] + [1.0 - rng.random() for _ in range(50)]
        constraints = [
            SoftConstraint.avoid("a", "f", "n", weight=w)
            if i % 2
            else SoftConstraint.affinity("a", "f", "b", "g", weight=w)
            for i, w in enumerate(weights)
        ]
        parsed = parse_constraints(emit_constraints(constraints))
        assert parsed == constraints
        assert [c.weight for c in parsed] == weights

    @pytest.mark.parametrize(
        "line, message",
        [
            ("avoid(frontend,public1).", "not a constraint functor"),
            ("affinity(a,f,b,g)", "not a constraint functor"),
            ("avoid(d(a,f),n,1.5).", "weight must be in"),
            ("affinity(a,f,a,g).", "two distinct components"),
        ],
    )
    def test_parse_errors(self, line, message):
        """Test malformed functors report their line number."""
        with pytest.raises(ConstraintParseError, match=message) as exc_info:
            parse_constraints("avoid(d(a,f),n).\n" + line + "\n")
        assert exc_info.value.line == 2

    def test_file_round_trip(self, tmp_path):
        """Test saving and loading a constraint file."""
        constraints = parse_constraints(CONSTRAINT_TEXT)
        path = tmp_path / "constraints.pl"
        save_constraints(constraints, path)
        assert load_constraints(path) == constraints

    def test_dropped(self):
        """Test dropped constraints carry their reason as a comment."""
        text = emit_dropped([(SoftConstraint.avoid("a", "f", "n"), "no room")])
        assert text == "avoid(d(a,f),n). % no room\n"
        assert parse_constraints(text.replace(" % no room", "")) == [SoftConstraint.avoid("a", "f", "n")]


class TestDumpModel:
    """Tests for dump_model()."""

    def test_sections(self, tiny_app, tiny_infra):
        """Test the dump lists nodes, domains and enforced constraints."""
        problem = PlacementProblem(
            tiny_app, tiny_infra, hard_soft=(SoftConstraint.avoid("web", "tiny", "n2"),)
        )
        text = dump_model(problem)
        assert text.startswith("% model for application 'tiny'\n")
        assert "objective: first\n" in text
        assert "  n1: cpu=4 intensity=100\n" in text
        assert "  db (mandatory):\n" in text
        assert "    std (importance 1): n2\n" in text
        assert "uses db" in text
        assert "  avoid(d(web,tiny),n2). % failure\n" in text

    def test_no_enforced(self, tiny_app, tiny_infra):
        """Test an empty constraint set is marked."""
        assert "  (none)\n" in dump_model(PlacementProblem(tiny_app, tiny_infra))


class TestMetrics:
    """Tests for the metrics table."""

    ROWS = [
        {
            "round": 0,
            "mode": "full-freeda",
            "downtime_pct": 100.0 * 68 / 120,
            "app_quality_pct": 100.0,
            "energy_kwh": 0.5,
            "co2_g": 401.48,
            "changes": 0,
        }
    ]

    def test_columns(self):
        """Test the column order is fixed."""
        assert list(metrics_frame(self.ROWS).columns) == METRIC_COLUMNS

    def test_format(self):
        """Test floats are written with six decimals."""
        lines = format_metrics_csv(metrics_frame(self.ROWS)).splitlines()
        assert lines[0] == ",".join(METRIC_COLUMNS)
        assert lines[1] == "0,full-freeda,56.666667,100.000000,0.500000,401.480000,0"

    def test_file_round_trip(self, tmp_path):
        """Test the CSV reads back with the same values."""
        path = tmp_path / "metrics.csv"
        write_metrics_csv(metrics_frame(self.ROWS), path)
        frame = read_metrics_csv(path)
        assert frame.loc[0, "mode"] == "full-freeda"
        assert frame.loc[0, "downtime_pct"] == pytest.approx(56.666667)
