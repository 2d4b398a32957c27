"""Shared dialog-state primitives: slots, belief states, alignment errors."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Slot(str, Enum):
    """The seven slots tracked while talking about a food item."""

    FOOD = "food"
    COOK = "cook"
    TYPE = "type"
    ANIMAL = "animal"
    PART = "part"
    FOODWEIGHT = "foodweight"
    METRIC = "metric"


#: Slots that correspond to knowledge-base relations (everything except the
#: requested weight and its unit).
RELATION_SLOTS = (Slot.FOOD, Slot.COOK, Slot.TYPE, Slot.ANIMAL, Slot.PART)

#: Canonical slot ordering used for serialization and deterministic sampling.
SLOT_ORDER = tuple(Slot)


class AlignmentError(ValueError):
    """Two sequences that must be aligned 1:1 have different lengths."""


@dataclass
class BeliefState:
    """Cumulative slot->value map plus the (optional) salt value in mg."""

    slots: dict[Slot, str] = field(default_factory=dict)
    salt_value: float | None = None

    def copy(self) -> "BeliefState":
        return BeliefState(slots=dict(self.slots), salt_value=self.salt_value)

    def relation_slots(self) -> dict[Slot, str]:
        """The subset of filled slots that constrain a KB lookup."""
        return {s: v for s, v in self.slots.items() if s in RELATION_SLOTS}

    def __post_init__(self) -> None:
        if self.salt_value is not None and self.salt_value < 0:
            raise ValueError(f"salt_value must be >= 0, got {self.salt_value}")
