"""
Exception hierarchy shared by every adaptive_placement module.

Library code raises these; the CLI maps them onto exit codes.
"""

from __future__ import annotations


class PlacementError(Exception):
    """Base class for all errors raised by adaptive_placement."""


class SpecError(PlacementError, ValueError):
    """
    An application, infrastructure or campaign document is invalid.

    Attributes:
        path: Dotted field path of the offending value (e.g.
            ``app.components[2].flavours``), or None when the whole
            document is at fault.
        line: 1-based line number for YAML syntax errors, if known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None) -> None:
        self.path = path
        self.line = line
        prefix = ""
        if path:
            prefix += f"{path}: "
        if line is not None:
            prefix = f"line {line}: " + prefix
        super().__init__(prefix + message)


class LogParseError(PlacementError, ValueError):
    """A simulation log line could not be understood."""

    def __init__(self, message: str, line: int) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}")


class ConstraintParseError(PlacementError, ValueError):
    """A soft-constraint line is not a valid functor."""

    def __init__(self, message: str, line: int) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}")


class ScenarioError(PlacementError, ValueError):
    """A scenario references a target that does not exist."""


class OracleSizeError(PlacementError):
    """The brute-force oracle was asked to enumerate too many candidates."""


class NoDeploymentError(PlacementError):
    """The solver found no satisfactory deployment, even after relaxation."""

    def __init__(self, message: str, timed_out: bool = False) -> None:
        self.timed_out = timed_out
        super().__init__(message)
