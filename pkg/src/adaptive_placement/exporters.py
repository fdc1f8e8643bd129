"""
Text formats for deployments, soft constraints, the solved model and metrics.

Deployment files hold one ``component flavour node`` line per assignment,
sorted. Constraint files hold one functor per line::

    avoid(d(frontend,large),public1).
    affinity(api,large,redis,large).
    antiaffinity(frontend,large,load_balancer,large).
    avoid(d(database,large),private1,1.0).

A trailing weight is optional (1.0 when absent). Lines starting with ``%``
are comments.
"""

from __future__ import annotations

import io
import re
from pathlib import Path
from typing import Iterable, Sequence

import pandas as pd

from adaptive_placement.errors import ConstraintParseError, SpecError
from adaptive_placement.model import (
    Assignment,
    ConstraintKind,
    Deployment,
    Provenance,
    SoftConstraint,
)
from adaptive_placement.solver import PlacementProblem, allowed_placements

METRIC_COLUMNS: list[str] = [
    "round",
    "mode",
    "downtime_pct",
    "app_quality_pct",
    "energy_kwh",
    "co2_g",
    "changes",
]

_NAME = r"[A-Za-z0-9][A-Za-z0-9_.\-]*"
_WEIGHT = r"(?:,\s*(?P<weight>[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?))?"
_AVOID_RE = re.compile(
    rf"^avoid\(\s*d\(\s*(?P<c>{_NAME})\s*,\s*(?P<f>{_NAME})\s*\)\s*,\s*(?P<n>{_NAME})\s*{_WEIGHT}\s*\)\.$"
)
_PAIR_RE = re.compile(
    rf"^(?P<kind>affinity|antiaffinity)\(\s*(?P<c>{_NAME})\s*,\s*(?P<f>{_NAME})\s*,"
    rf"\s*(?P<s>{_NAME})\s*,\s*(?P<fs>{_NAME})\s*{_WEIGHT}\s*\)\.$"
)


# =============================================================================
# Deployments
# =============================================================================


def emit_deployment(deployment: Deployment) -> str:
    """Render a deployment as sorted ``component flavour node`` lines."""
    return "".join(f"{a.component} {a.flavour} {a.node}\n" for a in deployment)


def parse_deployment(text: str) -> Deployment:
    """
    Parse a deployment file.

    Raises:
        SpecError: If a line does not have exactly three fields.
    """
    entries = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        fields = line.split()
        if len(fields) != 3:
            raise SpecError("expected 'component flavour node'", line=number)
        entries.append(Assignment(*fields))
    return Deployment(tuple(entries))


def save_deployment(deployment: Deployment, path: str | Path) -> None:
    Path(path).write_text(emit_deployment(deployment), encoding="utf-8")


def load_deployment(path: str | Path) -> Deployment:
    return parse_deployment(Path(path).read_text(encoding="utf-8"))


# =============================================================================
# Soft constraints
# =============================================================================


def emit_constraints(constraints: Iterable[SoftConstraint]) -> str:
    """Render constraints one per line, in the given order."""
    return "".join(c.to_text() + "\n" for c in constraints)


def parse_constraints(text: str, provenance: Provenance = Provenance.FAILURE) -> list[SoftConstraint]:
    """
    Parse constraint functors.

    Args:
        text: Constraint file contents.
        provenance: Provenance given to every parsed constraint.

    Raises:
        ConstraintParseError: On a malformed functor or weight.
    """
    constraints = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        constraints.append(_parse_functor(line, number, provenance))
    return constraints


def _parse_functor(line: str, number: int, provenance: Provenance) -> SoftConstraint:
    match = _AVOID_RE.match(line)
    try:
        if match:
            return SoftConstraint.avoid(
                match["c"], match["f"], match["n"], provenance, _weight(match["weight"])
            )
        match = _PAIR_RE.match(line)
        if match:
            kind = ConstraintKind(match["kind"])
            return SoftConstraint(
                kind, match["c"], match["f"], match["s"], match["fs"], provenance, _weight(match["weight"])
            )
    except ValueError as exc:
        raise ConstraintParseError(str(exc), number) from exc
    raise ConstraintParseError(f"not a constraint functor: {line!r}", number)


def _weight(token: str | None) -> float:
    return 1.0 if token is None else float(token)


def save_constraints(constraints: Iterable[SoftConstraint], path: str | Path) -> None:
    Path(path).write_text(emit_constraints(constraints), encoding="utf-8")


def load_constraints(path: str | Path, provenance: Provenance = Provenance.FAILURE) -> list[SoftConstraint]:
    return parse_constraints(Path(path).read_text(encoding="utf-8"), provenance)


def emit_dropped(dropped: Sequence[tuple[SoftConstraint, str]]) -> str:
    """Render dropped constraints with their reason as a comment line each."""
    return "".join(f"{c.to_text()} % {reason}\n" for c, reason in dropped)


# =============================================================================
# Model dump
# =============================================================================


def dump_model(problem: PlacementProblem) -> str:
    """
    Render the constraint model a solve call enforces.

    The dump lists the objective regime, budgets, node capacities, the
    admissible (flavour, node) values of every component, dependencies and
    the soft constraints enforced as hard.
    """
    app, infra = problem.app, problem.infra
    out = io.StringIO()
    out.write(f"% model for application '{app.name}'\n")
    out.write(f"objective: {problem.objective.value}\n")
    if problem.previous is not None:
        out.write(f"previous: {len(problem.previous)} assignment(s)\n")
    out.write(
        f"budgets: monetary={app.monetary_budget:g} carbon_g={app.carbon_budget:g} "
        f"energy_kwh={app.energy_budget:g} horizon_h={problem.horizon_hours:g}\n"
    )

    out.write("\nnodes:\n")
    for node in infra.nodes:
        capacities = " ".join(f"{r}={q:g}" for r, q in sorted(node.consumable_capacities.items()))
        state = "" if node.available else " unavailable"
        out.write(f"  {node.name}: {capacities} intensity={node.carbon_intensity:g}{state}\n")

    out.write("\nvariables:\n")
    domains = allowed_placements(problem)
    for name in sorted(domains):
        component = app.component(name)
        marker = "mandatory" if component.mandatory else "optional"
        out.write(f"  {name} ({marker}):\n")
        for flavour in component.flavours_by_importance:
            nodes = [n for f, n in domains[name] if f == flavour.name]
            listed = ", ".join(nodes) if nodes else "-"
            out.write(f"    {flavour.name} (importance {flavour.importance}): {listed}\n")
            for dep in flavour.dependencies:
                bounds = []
                if dep.max_latency is not None:
                    bounds.append(f"latency<={dep.max_latency:g}")
                if dep.min_availability is not None:
                    bounds.append(f"availability>={dep.min_availability:g}")
                suffix = f" [{' '.join(bounds)}]" if bounds else ""
                out.write(
                    f"      uses {dep.component} (importance>={dep.min_importance}){suffix}\n"
                )

    out.write("\nenforced:\n")
    if not problem.hard_soft:
        out.write("  (none)\n")
    for constraint in problem.hard_soft:
        out.write(f"  {constraint.to_text()} % {constraint.provenance.value}\n")
    return out.getvalue()


# =============================================================================
# Metrics
# =============================================================================


def metrics_frame(rows: Iterable[dict[str, object]]) -> pd.DataFrame:
    """Build the metrics table with the canonical column order."""
    frame = pd.DataFrame(list(rows), columns=METRIC_COLUMNS)
    return frame.astype({"round": "int64", "changes": "int64"}) if not frame.empty else frame


def format_metrics_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format="%.6f", lineterminator="\n")


def write_metrics_csv(frame: pd.DataFrame, path: str | Path) -> None:
    Path(path).write_text(format_metrics_csv(frame), encoding="utf-8")


def read_metrics_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path)
