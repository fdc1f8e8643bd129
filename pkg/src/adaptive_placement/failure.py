"""
Failure enhancer: resilience suggestions from a round's fact base.

Rules, evaluated over every event of the round:

    co-locate    affinity(c, s)    c on n timed out calling s on m (n != m) and
                                   neither node was disconnected nor the link
                                   congested in either direction at that tick
    avoid-link   avoid(c, n)       the same timeout while traffic from n to m
                                   was congested or n was disconnected
    avoid-link'  avoid(s, m)       twin of avoid-link for the callee side
    separate     antiaffinity(c,s) c on n failed at t while resource r of n was
                                   overloaded and c raced s for r
    avoid-node   avoid(c, n)       c on n failed at t while n was overloaded
                                   with no race involving c, or n was
                                   disconnected

"Failed" means unreachable or internal. The result is a set: a rule firing
at many ticks yields one constraint.
"""

from __future__ import annotations

import logging

from adaptive_placement.facts import FactBase
from adaptive_placement.model import Provenance, SoftConstraint

logger = logging.getLogger(__name__)


class FailureEnhancer:
    """Evaluates the resilience rules over a FactBase."""

    def __init__(self, facts: FactBase) -> None:
        self.facts = facts
        self.suggested: set[SoftConstraint] = set()

    def run(self) -> set[SoftConstraint]:
        self._timeouts()
        self._failures()
        return set(self.suggested)

    def _suggest(self, rule: str, constraint: SoftConstraint) -> None:
        if constraint not in self.suggested:
            logger.debug("%s: %s", rule, constraint.identity)
            self.suggested.add(constraint)

    def _timeouts(self) -> None:
        facts = self.facts
        for event in sorted(facts.timeouts):
            caller = facts.placement_of(event.component)
            callee = facts.placement_of(event.target)
            if caller is None or callee is None or caller.component == callee.component:
                continue
            n, m, t = caller.node, callee.node, event.tick
            if n == m:
                continue

            near_side = facts.is_congested(n, m, t) or facts.is_disconnected(n, t)
            far_side = facts.is_congested(m, n, t) or facts.is_disconnected(m, t)
            if near_side:
                self._suggest(
                    "avoid-link",
                    SoftConstraint.avoid(caller.component, caller.flavour, n, Provenance.FAILURE),
                )
            if far_side:
                self._suggest(
                    "avoid-link'",
                    SoftConstraint.avoid(callee.component, callee.flavour, m, Provenance.FAILURE),
                )
            if not near_side and not far_side:
                self._suggest(
                    "co-locate",
                    SoftConstraint.affinity(
                        caller.component,
                        caller.flavour,
                        callee.component,
                        callee.flavour,
                        Provenance.FAILURE,
                    ),
                )

    def _failures(self) -> None:
        facts = self.facts
        for entry in sorted(facts.deployed):
            c, fc, n = entry
            for t in sorted(facts.failed_ticks(c)):
                races = [
                    race
                    for race in facts.races_at(n, t)
                    if race.component == c and race.flavour == fc and facts.overloaded(n, race.resource, t)
                ]
                for race in races:
                    if race.other == c:
                        continue
                    self._suggest(
                        "separate",
                        SoftConstraint.anti_affinity(
                            c, fc, race.other, race.other_flavour, Provenance.FAILURE
                        ),
                    )
                if (facts.overloaded(n, None, t) and not races) or facts.is_disconnected(n, t):
                    self._suggest("avoid-node", SoftConstraint.avoid(c, fc, n, Provenance.FAILURE))


def suggest(facts: FactBase) -> set[SoftConstraint]:
    """
    Derive failure-provenance soft constraints from a fact base.

    Args:
        facts: Facts of one round.

    Returns:
        Set of suggested constraints; empty for an empty fact base.
    """
    suggested = FailureEnhancer(facts).run()
    logger.info("failure enhancer suggested %d constraint(s)", len(suggested))
    return suggested
