"""Tests for adaptive_placement.config module."""

from pathlib import Path

import pytest

from adaptive_placement.config import (
    application_from_dict,
    application_to_dict,
    infrastructure_to_dict,
    load_application,
    load_infrastructure,
    parse_application,
    parse_infrastructure,
    save_application,
    save_infrastructure,
)
from adaptive_placement.errors import SpecError
from adaptive_placement.presets import APPLICATION

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL_APP = """\
app:
  name: shop
  budgets: {monetary: 10, carbon: 100, energy: 1}
  components:
    - name: web
      flavours:
        - name: tiny
          importance: 1
          resources: {cpu: 1}
          attributes: {zone: edge}
          uses:
            - {component: db, max_latency: 20}
    - name: db
      mandatory: false
      flavours:
        - {name: std, importance: 1}
"""

MINIMAL_INFRA = """\
infra:
  nodes:
    - name: n1
      capacities: {cpu: 4}
      attributes: {zone: edge}
      costs: {cpu: 0.5}
      carbon_intensity: 120
  links: []
"""


class TestParseApplication:
    """Tests for parsing application documents."""

    def test_minimal_document(self):
        """Test defaults and value normalisation."""
        app = parse_application(MINIMAL_APP)
        web = app.component("web")
        assert web.mandatory is True
        assert app.component("db").mandatory is False
        tiny = web.flavour("tiny")
        assert tiny.attribute_requirements == {"zone": ("edge",)}
        assert tiny.dependencies[0].max_latency == 20.0
        assert tiny.dependencies[0].min_importance == 1
        assert tiny.energy_profile == 0.0
        assert app.monetary_budget == 10.0

    def test_missing_top_level_key(self):
        """Test that the document needs an app mapping."""
        with pytest.raises(SpecError, match="missing required field 'app'") as exc_info:
            parse_application("infra: {}\n")
        assert exc_info.value.path == "app"

    def test_missing_field_path(self):
        """Test that missing fields are reported with their path."""
        with pytest.raises(SpecError) as exc_info:
            parse_application("app:\n  name: x\n  budgets: {monetary: 1, carbon: 1, energy: 1}\n")
        assert exc_info.value.path == "app.components"

    def test_missing_budget(self):
        """Test each budget is required."""
        text = MINIMAL_APP.replace("energy: 1}", "}").replace(", }", "}")
        with pytest.raises(SpecError) as exc_info:
            parse_application(text)
        assert exc_info.value.path == "app.budgets.energy"

    def test_non_integer_importance(self):
        """Test importance must be an integer."""
        text = MINIMAL_APP.replace("{name: std, importance: 1}", "{name: std, importance: high}")
        with pytest.raises(SpecError, match="expected an integer") as exc_info:
            parse_application(text)
        assert exc_info.value.path == "app.components[1].flavours[0].importance"

    def test_non_numeric_resource(self):
        """Test resource demands must be numbers."""
        text = MINIMAL_APP.replace("resources: {cpu: 1}", "resources: {cpu: lots}")
        with pytest.raises(SpecError, match="expected a number") as exc_info:
            parse_application(text)
        assert exc_info.value.path == "app.components[0].flavours[0].resources.cpu"

    def test_invariant_violation_path(self):
        """Test validation failures carry the offending field path."""
        text = MINIMAL_APP.replace("- name: db", "- name: web")
        with pytest.raises(SpecError, match="duplicate component name 'web'") as exc_info:
            parse_application(text)
        assert exc_info.value.path == "app.components"

    def test_yaml_syntax_error_line(self):
        """Test YAML syntax errors report a 1-based line."""
        with pytest.raises(SpecError, match="invalid YAML") as exc_info:
            parse_application("app:\n\tname: x\n")
        assert exc_info.value.line == 2
        assert str(exc_info.value).startswith("line 2: ")

    def test_spec_error_is_value_error(self):
        """Test SpecError can be caught as ValueError."""
        with pytest.raises(ValueError):
            parse_application("just text")


class TestParseInfrastructure:
    """Tests for parsing infrastructure documents."""

    def test_minimal_document(self):
        """Test defaults of optional node fields."""
        infra = parse_infrastructure(MINIMAL_INFRA)
        node = infra.node("n1")
        assert node.available is True
        assert node.carbon_intensity == 120.0
        assert node.unit_costs == {"cpu": 0.5}
        assert infra.links == ()

    def test_link_with_three_endpoints(self):
        """Test a link needs exactly two endpoints."""
        text = MINIMAL_INFRA.replace("links: []", "links:\n    - {endpoints: [n1, n2, n3]}")
        with pytest.raises(SpecError, match="exactly two endpoints") as exc_info:
            parse_infrastructure(text)
        assert exc_info.value.path == "infra.links[0].endpoints"

    def test_link_to_unknown_node(self):
        """Test links must join declared nodes."""
        text = MINIMAL_INFRA.replace("links: []", "links:\n    - {endpoints: [n1, ghost]}")
        with pytest.raises(SpecError, match="unknown node 'ghost'") as exc_info:
            parse_infrastructure(text)
        assert exc_info.value.path == "infra.links[0]"

    def test_negative_capacity(self):
        """Test capacities must be non-negative."""
        text = MINIMAL_INFRA.replace("{cpu: 4}", "{cpu: -4}")
        with pytest.raises(SpecError, match="capacity of 'cpu'"):
            parse_infrastructure(text)


class TestFiles:
    """Tests for loading and saving specification files."""

    def test_shipped_files_match_presets(self, case_app, case_infra):
        """Test the YAML files under configs/ describe the built-in case study."""
        assert load_application(CONFIGS / "application.yaml") == case_app
        assert load_infrastructure(CONFIGS / "infrastructure.yaml") == case_infra

    def test_application_round_trip(self, tmp_path, case_app):
        """Test save then load yields an equal application."""
        path = tmp_path / "app.yaml"
        save_application(case_app, path)
        assert load_application(path) == case_app

    def test_infrastructure_round_trip(self, tmp_path, case_infra):
        """Test save then load yields an equal infrastructure."""
        path = tmp_path / "infra.yaml"
        save_infrastructure(case_infra, path)
        assert load_infrastructure(path) == case_infra

    def test_to_dict_matches_source(self, case_app):
        """Test application_to_dict inverts application_from_dict."""
        assert application_from_dict(application_to_dict(case_app)) == case_app
        assert application_to_dict(case_app)["budgets"] == APPLICATION["budgets"]

    def test_infrastructure_to_dict_links(self, case_infra):
        """Test links are written with sorted endpoints."""
        links = infrastructure_to_dict(case_infra)["links"]
        assert links[0]["endpoints"] == ["public1", "public2"]
        assert len(links) == 15

    def test_missing_file(self, tmp_path):
        """Test loading a missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_application(tmp_path / "missing.yaml")
