"""
Application and infrastructure specification files.

Specs are YAML documents with a top-level ``app:`` and/or ``infra:`` key. One
file may carry both. The schema:

.. code-block:: yaml

    app:
      name: case_study
      budgets: {monetary: 100.0, carbon: 5000.0, energy: 10.0}
      components:
        - name: api
          mandatory: true
          flavours:
            - name: large
              importance: 3
              resources: {cpu: 2000, ram: 2048}
              attributes: {subnet: [private]}
              uses:
                - {component: redis, min_importance: 1, max_latency: 20,
                   min_availability: 0.9, comm_w: 2.0}
              energy_w: 25.0
    infra:
      nodes:
        - name: private1
          capacities: {cpu: 2500, ram: 3072, storage: 30000}
          attributes: {subnet: private, encrypted_storage: true}
          costs: {cpu: 0.002, ram: 0.001}
          carbon_intensity: 493
          available: true
      links:
        - {endpoints: [private1, private2], latency: 2, availability: 0.999}

Parsing raises ``SpecError`` naming the offending field path; a parsed spec
always passes ``validate_application`` / ``validate_infrastructure``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from adaptive_placement.errors import SpecError
from adaptive_placement.model import (
    ApplicationSpec,
    Component,
    Dependency,
    Flavour,
    InfrastructureSpec,
    Link,
    Node,
    validate_application,
    validate_infrastructure,
)

# =============================================================================
# YAML helpers
# =============================================================================


def load_yaml_document(text: str) -> Any:
    """
    Parse YAML text, turning syntax errors into ``SpecError`` with a line.

    Args:
        text: YAML source.

    Returns:
        The decoded document (None for an empty document).
    """
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise SpecError(f"invalid YAML: {problem}", line=line) from exc


def dump_yaml_document(data: Any) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, allow_unicode=True)


def _require(data: Any, key: str, path: str) -> Any:
    if not isinstance(data, dict):
        raise SpecError("expected a mapping", path=path)
    if key not in data:
        raise SpecError(f"missing required field '{key}'", path=f"{path}.{key}" if path else key)
    return data[key]


def _mapping(value: Any, path: str) -> dict[str, Any]:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise SpecError("expected a mapping", path=path)
    return dict(value)


def _sequence(value: Any, path: str) -> list[Any]:
    if value is None:
        return []
    if not isinstance(value, list):
        raise SpecError("expected a list", path=path)
    return list(value)


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"expected a number, got {value!r}", path=path)
    return float(value)


def _numbers(value: Any, path: str) -> dict[str, float]:
    return {str(k): _number(v, f"{path}.{k}") for k, v in _mapping(value, path).items()}


def _raise_violations(violations: list[str]) -> None:
    if violations:
        first, _, message = violations[0].partition(": ")
        extra = f" (and {len(violations) - 1} more)" if len(violations) > 1 else ""
        raise SpecError(message + extra, path=first)


# =============================================================================
# Application
# =============================================================================


def application_from_dict(data: Any, path: str = "app") -> ApplicationSpec:
    """
    Build an ApplicationSpec from the decoded ``app:`` mapping.

    Args:
        data: Mapping with ``name``, ``components`` and ``budgets``.
        path: Field path used in error messages.

    Returns:
        A validated ApplicationSpec.

    Raises:
        SpecError: If a field is missing, mistyped, or an invariant fails.
    """
    components_raw = _sequence(_require(data, "components", path), f"{path}.components")
    budgets = _mapping(_require(data, "budgets", path), f"{path}.budgets")
    components = tuple(
        _component_from_dict(raw, f"{path}.components[{i}]") for i, raw in enumerate(components_raw)
    )
    app = ApplicationSpec(
        name=str(data.get("name", "application")),
        components=components,
        monetary_budget=_number(_require(budgets, "monetary", f"{path}.budgets"), f"{path}.budgets.monetary"),
        carbon_budget=_number(_require(budgets, "carbon", f"{path}.budgets"), f"{path}.budgets.carbon"),
        energy_budget=_number(_require(budgets, "energy", f"{path}.budgets"), f"{path}.budgets.energy"),
    )
    _raise_violations(validate_application(app))
    return app


def _component_from_dict(data: Any, path: str) -> Component:
    name = str(_require(data, "name", path))
    flavours_raw = _sequence(_require(data, "flavours", path), f"{path}.flavours")
    flavours = tuple(
        _flavour_from_dict(raw, f"{path}.flavours[{i}]") for i, raw in enumerate(flavours_raw)
    )
    return Component(name=name, flavours=flavours, mandatory=bool(data.get("mandatory", True)))


def _flavour_from_dict(data: Any, path: str) -> Flavour:
    importance = _require(data, "importance", path)
    if isinstance(importance, bool) or not isinstance(importance, int):
        raise SpecError(f"expected an integer, got {importance!r}", path=f"{path}.importance")

    requirements: dict[str, tuple[Any, ...]] = {}
    for attribute, allowed in _mapping(data.get("attributes"), f"{path}.attributes").items():
        values = allowed if isinstance(allowed, list) else [allowed]
        requirements[str(attribute)] = tuple(values)

    dependencies = []
    for i, raw in enumerate(_sequence(data.get("uses"), f"{path}.uses")):
        dpath = f"{path}.uses[{i}]"
        dependencies.append(
            Dependency(
                component=str(_require(raw, "component", dpath)),
                min_importance=int(raw.get("min_importance", 1)),
                max_latency=(
                    _number(raw["max_latency"], f"{dpath}.max_latency")
                    if raw.get("max_latency") is not None
                    else None
                ),
                min_availability=(
                    _number(raw["min_availability"], f"{dpath}.min_availability")
                    if raw.get("min_availability") is not None
                    else None
                ),
                comm_w=_number(raw.get("comm_w", 0.0), f"{dpath}.comm_w"),
            )
        )

    return Flavour(
        name=str(_require(data, "name", path)),
        importance=importance,
        consumable_demands=_numbers(data.get("resources"), f"{path}.resources"),
        attribute_requirements=requirements,
        dependencies=tuple(dependencies),
        energy_profile=_number(data.get("energy_w", 0.0), f"{path}.energy_w"),
    )


def application_to_dict(app: ApplicationSpec) -> dict[str, Any]:
    """Convert an ApplicationSpec to the ``app:`` mapping (inverse of from_dict)."""
    components = []
    for component in app.components:
        flavours = []
        for flavour in component.flavours:
            entry: dict[str, Any] = {
                "name": flavour.name,
                "importance": flavour.importance,
                "resources": dict(flavour.consumable_demands),
                "attributes": {k: list(v) for k, v in flavour.attribute_requirements.items()},
            }
            if flavour.dependencies:
                entry["uses"] = [_dependency_to_dict(dep) for dep in flavour.dependencies]
            entry["energy_w"] = flavour.energy_profile
            flavours.append(entry)
        components.append(
            {"name": component.name, "mandatory": component.mandatory, "flavours": flavours}
        )
    return {
        "name": app.name,
        "budgets": {
            "monetary": app.monetary_budget,
            "carbon": app.carbon_budget,
            "energy": app.energy_budget,
        },
        "components": components,
    }


def _dependency_to_dict(dep: Dependency) -> dict[str, Any]:
    result: dict[str, Any] = {"component": dep.component, "min_importance": dep.min_importance}
    if dep.max_latency is not None:
        result["max_latency"] = dep.max_latency
    if dep.min_availability is not None:
        result["min_availability"] = dep.min_availability
    if dep.comm_w:
        result["comm_w"] = dep.comm_w
    return result


def parse_application(text: str) -> ApplicationSpec:
    """
    Parse an application specification document.

    Args:
        text: YAML text with a top-level ``app:`` mapping.

    Returns:
        ApplicationSpec passing validation.

    Raises:
        SpecError: On YAML syntax errors (with line) or schema violations
            (with field path).
    """
    document = load_yaml_document(text)
    return application_from_dict(_require(document, "app", ""))


# =============================================================================
# Infrastructure
# =============================================================================


def infrastructure_from_dict(data: Any, path: str = "infra") -> InfrastructureSpec:
    """
    Build an InfrastructureSpec from the decoded ``infra:`` mapping.

    Raises:
        SpecError: If a field is missing, mistyped, or an invariant fails.
    """
    nodes_raw = _sequence(_require(data, "nodes", path), f"{path}.nodes")
    nodes = []
    for i, raw in enumerate(nodes_raw):
        npath = f"{path}.nodes[{i}]"
        nodes.append(
            Node(
                name=str(_require(raw, "name", npath)),
                consumable_capacities=_numbers(raw.get("capacities"), f"{npath}.capacities"),
                attributes=_mapping(raw.get("attributes"), f"{npath}.attributes"),
                unit_costs=_numbers(raw.get("costs"), f"{npath}.costs"),
                carbon_intensity=_number(raw.get("carbon_intensity", 0.0), f"{npath}.carbon_intensity"),
                available=bool(raw.get("available", True)),
            )
        )

    links = []
    for i, raw in enumerate(_sequence(data.get("links"), f"{path}.links")):
        lpath = f"{path}.links[{i}]"
        endpoints = _sequence(_require(raw, "endpoints", lpath), f"{lpath}.endpoints")
        if len(endpoints) != 2:
            raise SpecError("a link needs exactly two endpoints", path=f"{lpath}.endpoints")
        links.append(
            Link(
                endpoints=(str(endpoints[0]), str(endpoints[1])),
                latency=_number(raw.get("latency", 0.0), f"{lpath}.latency"),
                availability=_number(raw.get("availability", 1.0), f"{lpath}.availability"),
            )
        )

    infra = InfrastructureSpec(nodes=tuple(nodes), links=tuple(links))
    _raise_violations(validate_infrastructure(infra))
    return infra


def infrastructure_to_dict(infra: InfrastructureSpec) -> dict[str, Any]:
    """Convert an InfrastructureSpec to the ``infra:`` mapping."""
    return {
        "nodes": [
            {
                "name": node.name,
                "capacities": dict(node.consumable_capacities),
                "attributes": dict(node.attributes),
                "costs": dict(node.unit_costs),
                "carbon_intensity": node.carbon_intensity,
                "available": node.available,
            }
            for node in infra.nodes
        ],
        "links": [
            {
                "endpoints": list(link.endpoints),
                "latency": link.latency,
                "availability": link.availability,
            }
            for link in infra.links
        ],
    }


def parse_infrastructure(text: str) -> InfrastructureSpec:
    """
    Parse an infrastructure specification document.

    Args:
        text: YAML text with a top-level ``infra:`` mapping.

    Returns:
        InfrastructureSpec passing validation.

    Raises:
        SpecError: On YAML syntax errors or schema violations.
    """
    document = load_yaml_document(text)
    return infrastructure_from_dict(_require(document, "infra", ""))


# =============================================================================
# Files
# =============================================================================


def load_application(path: str | Path) -> ApplicationSpec:
    """
    Load an application specification from a YAML file.

    Raises:
        FileNotFoundError: If the file doesn't exist.
        SpecError: If the document is invalid.
    """
    return parse_application(Path(path).read_text(encoding="utf-8"))


def load_infrastructure(path: str | Path) -> InfrastructureSpec:
    """
    Load an infrastructure specification from a YAML file.

    Raises:
        FileNotFoundError: If the file doesn't exist.
        SpecError: If the document is invalid.
    """
    return parse_infrastructure(Path(path).read_text(encoding="utf-8"))


def save_application(app: ApplicationSpec, path: str | Path) -> None:
    Path(path).write_text(dump_yaml_document({"app": application_to_dict(app)}), encoding="utf-8")


def save_infrastructure(infra: InfrastructureSpec, path: str | Path) -> None:
    Path(path).write_text(
        dump_yaml_document({"infra": infrastructure_to_dict(infra)}), encoding="utf-8"
    )
