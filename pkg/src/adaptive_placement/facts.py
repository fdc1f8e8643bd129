"""
Fact base and simulation log codec.

The simulator writes one log per round; the enhancers never look at the
simulator's internals, only at the facts and power samples read back from
that log. Every line has the form ``HH:MM:SS|SOURCE|Message`` where the
timestamp is derived from the tick, so a log is byte-deterministic.

Message grammar::

    Simulation - Event Tick-<t> fired.
    PlacementManager - {c_f -> n | c_f -> n | ...}      (may wrap)
    Event - unreachable <c> <t>
    Event - internal <c> <t>
    Event - timeout <c> <s> <t>
    Event - congested <n> <m> <t>
    Event - disconnected <n> <t>
    Event - overload <n> <r> <t> [load%]
    Event - race <n> <r> <c> <fc> <s> <fs> <t>
    Monitor - ENERGY <c> <watts> <t>
    Monitor - NODEPOWER <n> <watts> <t>
    Monitor - FLOWPOWER <c> <s> <watts> <t>
    Monitor - INTENSITY <n> <gco2_per_kwh> <t>

Only tick numbers carry meaning; the timestamps are decoration.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from adaptive_placement.errors import LogParseError
from adaptive_placement.model import FLAVOUR_SEPARATOR, Assignment, Deployment

logger = logging.getLogger(__name__)

# =============================================================================
# Facts
# =============================================================================


class TimeoutEvent(NamedTuple):
    component: str
    target: str
    tick: int


class Internal(NamedTuple):
    component: str
    tick: int


class Unreachable(NamedTuple):
    component: str
    tick: int


class Congested(NamedTuple):
    """Directed: traffic from ``node`` towards ``other`` is congested."""

    node: str
    other: str
    tick: int


class Disconnected(NamedTuple):
    node: str
    tick: int


class Overload(NamedTuple):
    """Resource ``resource`` of ``node`` exceeded capacity from ``start`` to ``end``."""

    node: str
    resource: str
    start: int
    end: int
    load_pct: float | None = None


class Race(NamedTuple):
    node: str
    resource: str
    component: str
    flavour: str
    other: str
    other_flavour: str
    tick: int


@dataclass
class FactBase:
    """
    Everything the failure enhancer may reason about for one round.

    Attributes:
        deployed: Assignments of the most recent placement snapshot.
        timeouts, internals, unreachables, congestions, disconnections,
        overloads, races: Event facts, one entry per logged event (overloads
            coalesced into intervals).
    """

    deployed: set[Assignment] = field(default_factory=set)
    timeouts: set[TimeoutEvent] = field(default_factory=set)
    internals: set[Internal] = field(default_factory=set)
    unreachables: set[Unreachable] = field(default_factory=set)
    congestions: set[Congested] = field(default_factory=set)
    disconnections: set[Disconnected] = field(default_factory=set)
    overloads: set[Overload] = field(default_factory=set)
    races: set[Race] = field(default_factory=set)

    @property
    def deployment(self) -> Deployment:
        return Deployment(tuple(self.deployed))

    def placement_of(self, component: str) -> Assignment | None:
        for entry in self.deployed:
            if entry.component == component:
                return entry
        return None

    def is_empty(self) -> bool:
        return not any(
            (
                self.deployed,
                self.timeouts,
                self.internals,
                self.unreachables,
                self.congestions,
                self.disconnections,
                self.overloads,
                self.races,
            )
        )

    # -------------------------------------------------------------------------
    # Derived predicates
    # -------------------------------------------------------------------------

    def overloaded(self, node: str, resource: str | None, tick: int) -> bool:
        """True if some overload interval of ``node`` (any resource if None) covers ``tick``."""
        return any(
            o.node == node and (resource is None or o.resource == resource) and o.start <= tick <= o.end
            for o in self.overloads
        )

    def is_congested(self, node: str, other: str, tick: int) -> bool:
        return Congested(node, other, tick) in self.congestions

    def is_disconnected(self, node: str, tick: int) -> bool:
        return Disconnected(node, tick) in self.disconnections

    def disconnected_nodes(self) -> set[str]:
        return {d.node for d in self.disconnections}

    def failed_ticks(self, component: str) -> set[int]:
        """Ticks at which ``component`` was unreachable or failed internally."""
        ticks = {u.tick for u in self.unreachables if u.component == component}
        ticks.update(i.tick for i in self.internals if i.component == component)
        return ticks

    def races_at(self, node: str, tick: int) -> list[Race]:
        return sorted(r for r in self.races if r.node == node and r.tick == tick)


def coalesce_overloads(samples: Iterable[tuple[str, str, int, float | None]]) -> set[Overload]:
    """
    Merge per-tick overload samples into interval facts.

    Samples at consecutive ticks for one (node, resource) join one interval; a
    gap of one tick or more starts a new one. The interval keeps the peak load.

    Args:
        samples: (node, resource, tick, load_pct or None) tuples in any order.

    Returns:
        Set of Overload intervals.
    """
    by_key: dict[tuple[str, str], dict[int, float | None]] = defaultdict(dict)
    for node, resource, tick, load in samples:
        previous = by_key[(node, resource)].get(tick)
        if previous is None or (load is not None and load > previous):
            by_key[(node, resource)][tick] = load

    intervals: set[Overload] = set()
    for (node, resource), loads in by_key.items():
        ticks = sorted(loads)
        start = prev = ticks[0]
        peak = loads[start]
        for tick in ticks[1:]:
            if tick == prev + 1:
                peak = _max_load(peak, loads[tick])
            else:
                intervals.add(Overload(node, resource, start, prev, peak))
                start, peak = tick, loads[tick]
            prev = tick
        intervals.add(Overload(node, resource, start, prev, peak))
    return intervals


def _max_load(a: float | None, b: float | None) -> float | None:
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


# =============================================================================
# Power samples and round trace
# =============================================================================


@dataclass
class PowerSamples:
    """
    Per-tick monitoring samples of one round.

    Attributes:
        component: component -> tick -> watts.
        node: node -> tick -> watts (hosted component power only).
        flow: (source, target) -> tick -> watts for cross-node interactions.
        intensity: node -> tick -> gCO2/kWh in effect.
    """

    component: dict[str, dict[int, float]] = field(default_factory=dict)
    node: dict[str, dict[int, float]] = field(default_factory=dict)
    flow: dict[tuple[str, str], dict[int, float]] = field(default_factory=dict)
    intensity: dict[str, dict[int, float]] = field(default_factory=dict)

    def record(self, table: dict, key, tick: int, value: float) -> None:  # type: ignore[type-arg]
        table.setdefault(key, {})[tick] = value

    def intensity_series(self, node: str) -> list[tuple[int, float]]:
        return sorted(self.intensity.get(node, {}).items())


@dataclass(frozen=True)
class RoundMetrics:
    """Per-round summary; percentages lie in [0, 100]."""

    downtime_pct: float
    app_quality_pct: float
    energy_kwh: float
    co2_g: float

    def __post_init__(self) -> None:
        for name in ("downtime_pct", "app_quality_pct"):
            value = getattr(self, name)
            if not (0.0 <= value <= 100.0):
                raise ValueError(f"{name} must be in [0, 100], got {value}")
        if self.co2_g < 0 or self.energy_kwh < 0:
            raise ValueError("energy and emissions must be >= 0")


@dataclass
class RoundTrace:
    """
    What one simulated round left behind.

    Attributes:
        ticks: Number of ticks in the round.
        tick_minutes: Duration of one tick.
        deployment: Placement in force during the round.
        facts: Event facts (overloads coalesced).
        power: Monitoring samples.
        metrics: Round metrics; None for traces rebuilt from a log alone.
        log_lines: Rendered simulation log, one entry per line.
    """

    ticks: int
    tick_minutes: float
    deployment: Deployment
    facts: FactBase
    power: PowerSamples
    metrics: RoundMetrics | None = None
    log_lines: list[str] = field(default_factory=list)

    @property
    def tick_hours(self) -> float:
        return self.tick_minutes / 60.0

    @property
    def log_text(self) -> str:
        return "".join(line + "\n" for line in self.log_lines)


# =============================================================================
# Log writing
# =============================================================================


def format_timestamp(tick: int, tick_minutes: float) -> str:
    seconds = int(round(tick * tick_minutes * 60))
    hours, rest = divmod(seconds, 3600)
    minutes, secs = divmod(rest, 60)
    return f"{hours:02d}:{minutes:02d}:{secs:02d}"


def log_line(tick: int, tick_minutes: float, message: str, source: str = "SIM") -> str:
    return f"{format_timestamp(tick, tick_minutes)}|{source}|{message}"


def format_placement_block(deployment: Deployment, per_line: int = 4) -> list[str]:
    """
    Render a placement snapshot, wrapping after ``per_line`` entries.

    Returns:
        The message of the first line followed by raw continuation lines.
    """
    entries = [f"{a.component}{FLAVOUR_SEPARATOR}{a.flavour} -> {a.node}" for a in deployment]
    if not entries:
        return ["PlacementManager - {}"]
    chunks = [entries[i : i + per_line] for i in range(0, len(entries), per_line)]
    lines = [" | ".join(chunk) for chunk in chunks]
    lines = [line + " |" for line in lines[:-1]] + [lines[-1]]
    lines[0] = "PlacementManager - {" + lines[0]
    lines[-1] = lines[-1] + "}"
    lines[1:] = ["    " + line for line in lines[1:]]
    return lines


def format_watts(value: float) -> str:
    """Shortest text that reads back as the same float."""
    return repr(float(value))


# =============================================================================
# Log parsing
# =============================================================================


class _LogReader:
    """Single pass over a simulation log collecting facts and samples."""

    def __init__(self) -> None:
        self.facts = FactBase()
        self.power = PowerSamples()
        self.overload_samples: list[tuple[str, str, int, float | None]] = []
        self.max_tick = -1
        self._block: list[str] | None = None
        self._block_line = 0

    def feed(self, text: str) -> None:
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if self._block is not None:
                self._block.append(line)
                if line.endswith("}"):
                    self._finish_block()
                continue
            parts = line.split("|", 2)
            if len(parts) != 3:
                raise LogParseError("expected 'HH:MM:SS|SOURCE|Message'", number)
            self._message(parts[2].strip(), number)
        if self._block is not None:
            raise LogParseError("unterminated placement block", self._block_line)
        self.facts.overloads = coalesce_overloads(self.overload_samples)

    def _message(self, message: str, number: int) -> None:
        source, sep, body = message.partition(" - ")
        if not sep:
            raise LogParseError(f"missing ' - ' separator in {message!r}", number)
        source = source.strip()
        if source == "Simulation":
            if body.startswith("Event Tick-"):
                self._tick(body[len("Event Tick-") :].rstrip(".").split(" ")[0], number)
        elif source == "PlacementManager":
            self._block = [body.strip()]
            self._block_line = number
            if body.strip().endswith("}"):
                self._finish_block()
        elif source == "Event":
            self._event(body.split(), number)
        elif source == "Monitor":
            self._monitor(body.split(), number)
        else:
            raise LogParseError(f"unknown message source {source!r}", number)

    def _tick(self, token: str, number: int) -> None:
        self.max_tick = max(self.max_tick, _int(token, number))

    def _finish_block(self) -> None:
        assert self._block is not None
        text = " ".join(self._block)
        number = self._block_line
        self._block = None
        if not (text.startswith("{") and text.endswith("}")):
            raise LogParseError("placement block must be enclosed in braces", number)
        body = text[1:-1].strip()
        deployed: set[Assignment] = set()
        for entry in filter(None, (e.strip() for e in body.split("|"))):
            name, arrow, node = entry.partition("->")
            name, node = name.strip(), node.strip()
            component, sep, flavour = name.rpartition(FLAVOUR_SEPARATOR)
            if not arrow or not sep or not component or not flavour or not node:
                raise LogParseError(f"malformed placement entry {entry!r}", number)
            deployed.add(Assignment(component, flavour, node))
        self.facts.deployed = deployed

    def _event(self, tokens: list[str], number: int) -> None:
        if not tokens:
            raise LogParseError("empty event", number)
        kind, args = tokens[0], tokens[1:]
        facts = self.facts
        if kind == "unreachable":
            _arity(args, 2, kind, number)
            facts.unreachables.add(Unreachable(args[0], self._seen(args[1], number)))
        elif kind == "internal":
            _arity(args, 2, kind, number)
            facts.internals.add(Internal(args[0], self._seen(args[1], number)))
        elif kind == "timeout":
            _arity(args, 3, kind, number)
            facts.timeouts.add(TimeoutEvent(args[0], args[1], self._seen(args[2], number)))
        elif kind == "congested":
            _arity(args, 3, kind, number)
            facts.congestions.add(Congested(args[0], args[1], self._seen(args[2], number)))
        elif kind == "disconnected":
            _arity(args, 2, kind, number)
            facts.disconnections.add(Disconnected(args[0], self._seen(args[1], number)))
        elif kind == "overload":
            if len(args) not in (3, 4):
                raise LogParseError("overload takes 3 or 4 arguments", number)
            load = _float(args[3].rstrip("%"), number) if len(args) == 4 else None
            self.overload_samples.append((args[0], args[1], self._seen(args[2], number), load))
        elif kind == "race":
            _arity(args, 7, kind, number)
            facts.races.add(Race(*args[:6], self._seen(args[6], number)))  # type: ignore[arg-type]
        else:
            raise LogParseError(f"unknown event {kind!r}", number)

    def _monitor(self, tokens: list[str], number: int) -> None:
        if not tokens:
            raise LogParseError("empty monitor sample", number)
        kind, args = tokens[0], tokens[1:]
        power = self.power
        if kind == "ENERGY":
            _arity(args, 3, kind, number)
            power.record(power.component, args[0], self._seen(args[2], number), _float(args[1], number))
        elif kind == "NODEPOWER":
            _arity(args, 3, kind, number)
            power.record(power.node, args[0], self._seen(args[2], number), _float(args[1], number))
        elif kind == "FLOWPOWER":
            _arity(args, 4, kind, number)
            power.record(
                power.flow, (args[0], args[1]), self._seen(args[3], number), _float(args[2], number)
            )
        elif kind == "INTENSITY":
            _arity(args, 3, kind, number)
            power.record(power.intensity, args[0], self._seen(args[2], number), _float(args[1], number))
        else:
            raise LogParseError(f"unknown monitor sample {kind!r}", number)

    def _seen(self, token: str, number: int) -> int:
        tick = _int(token, number)
        self.max_tick = max(self.max_tick, tick)
        return tick


def _arity(args: list[str], expected: int, kind: str, number: int) -> None:
    if len(args) != expected:
        raise LogParseError(f"{kind} takes {expected} arguments, got {len(args)}", number)


def _int(token: str, number: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise LogParseError(f"expected a tick number, got {token!r}", number) from None
    if value < 0:
        raise LogParseError(f"tick must be >= 0, got {value}", number)
    return value


def _float(token: str, number: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise LogParseError(f"expected a number, got {token!r}", number) from None


def parse_simulation_log(text: str) -> FactBase:
    """
    Parse a simulation log into a fact base.

    Args:
        text: Log contents.

    Returns:
        FactBase whose deployed set is the last placement block and whose
        overload facts are coalesced intervals.

    Raises:
        LogParseError: On a malformed line, with its 1-based number.
    """
    reader = _LogReader()
    reader.feed(text)
    logger.debug(
        "parsed log: %d deployed, %d unreachable, %d overload intervals",
        len(reader.facts.deployed),
        len(reader.facts.unreachables),
        len(reader.facts.overloads),
    )
    return reader.facts


def trace_from_log(text: str, tick_minutes: float = 1.0) -> RoundTrace:
    """
    Rebuild a metric-less RoundTrace from a log (facts plus power samples).

    Raises:
        LogParseError: On a malformed line.
    """
    reader = _LogReader()
    reader.feed(text)
    return RoundTrace(
        ticks=reader.max_tick + 1,
        tick_minutes=tick_minutes,
        deployment=reader.facts.deployment,
        facts=reader.facts,
        power=reader.power,
        log_lines=text.splitlines(),
    )
