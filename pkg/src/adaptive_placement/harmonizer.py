"""
Harmonizer: reconcile failure and energy suggestions.

Two constraints conflict when one is an affinity and the other an
anti-affinity over the same (component, flavour) pair. Conflicts between the
two enhancers are settled by priority; a conflict inside one enhancer's own
output cannot be settled and drops both. Avoid constraints always pass.
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import Sequence

from adaptive_placement.model import ConstraintKind, Provenance, SoftConstraint

logger = logging.getLogger(__name__)


class Priority(str, Enum):
    FAILURE = "failure"
    ENERGY = "energy"
    NONE = "none"


def harmonize(
    failure_cs: Sequence[SoftConstraint],
    energy_cs: Sequence[SoftConstraint],
    priority: Priority = Priority.NONE,
) -> tuple[list[SoftConstraint], list[tuple[SoftConstraint, str]]]:
    """
    Resolve affinity/anti-affinity conflicts between the two enhancers.

    Args:
        failure_cs: Failure-enhancer suggestions.
        energy_cs: Energy-enhancer suggestions.
        priority: Which side wins a cross-enhancer conflict; NONE drops both.

    Returns:
        (kept, dropped). Kept lists failure constraints first (by text), then
        energy constraints by descending weight and text. Each dropped entry
        carries a reason. A constraint in both inputs is kept once, as a
        failure constraint.
    """
    sides: dict[str, tuple[SoftConstraint, Provenance]] = {}
    for constraint in failure_cs:
        sides.setdefault(constraint.identity, (constraint, Provenance.FAILURE))
    for constraint in energy_cs:
        known = sides.get(constraint.identity)
        if known is None:
            sides[constraint.identity] = (constraint, Provenance.ENERGY)
        elif known[1] is Provenance.ENERGY and constraint.weight > known[0].weight:
            sides[constraint.identity] = (constraint, Provenance.ENERGY)

    by_pair: dict[tuple, dict[ConstraintKind, str]] = {}  # type: ignore[type-arg]
    for identity, (constraint, _side) in sides.items():
        if constraint.is_pairwise:
            by_pair.setdefault(constraint.pair, {})[constraint.kind] = identity

    dropped: dict[str, str] = {}
    for pair, kinds in sorted(by_pair.items()):
        if len(kinds) < 2:
            continue
        affinity = kinds[ConstraintKind.AFFINITY]
        anti = kinds[ConstraintKind.ANTI_AFFINITY]
        affinity_side, anti_side = sides[affinity][1], sides[anti][1]
        if affinity_side is anti_side:
            dropped[affinity] = f"contradicts {anti} from the same enhancer"
            dropped[anti] = f"contradicts {affinity} from the same enhancer"
        elif priority is Priority.NONE:
            dropped[affinity] = f"conflicts with {anti}; no priority"
            dropped[anti] = f"conflicts with {affinity}; no priority"
        else:
            loser = affinity if affinity_side.value != priority.value else anti
            winner = anti if loser == affinity else affinity
            dropped[loser] = f"conflicts with {winner}; {priority.value} priority"
        logger.debug("conflict over %s resolved with priority %s", pair, priority.value)

    failure_kept = sorted(
        (c for identity, (c, side) in sides.items() if side is Provenance.FAILURE and identity not in dropped),
        key=lambda c: c.to_text(),
    )
    energy_kept = sorted(
        (c for identity, (c, side) in sides.items() if side is Provenance.ENERGY and identity not in dropped),
        key=lambda c: (-c.weight, c.to_text()),
    )
    dropped_list = sorted(
        ((sides[identity][0], reason) for identity, reason in dropped.items()),
        key=lambda item: item[0].to_text(),
    )
    if dropped_list:
        logger.info("harmonizer dropped %d constraint(s)", len(dropped_list))
    return failure_kept + energy_kept, dropped_list
