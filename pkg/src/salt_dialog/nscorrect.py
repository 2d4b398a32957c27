"""Symbolic salt correction: replace predicted salt values with KB truth.

A predicted belief state is only trusted for its slot values.  The salt value
is re-derived from the knowledge base: retrieved verbatim when the request
matches a record's standard serving, computed by linear scaling otherwise.
Beliefs that match several records (or none) are left untouched so the policy
layer can ask a clarification question instead of guessing.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .belief import AlignmentError, BeliefState, Slot
from .foodkb import KnowledgeBase, Relation, UnitMismatch, UnitTable, lookup, salt_for

#: Relative tolerance for treating a requested weight as the standard serving.
STANDARD_WEIGHT_RTOL = 1e-9


class CorrectionStatus(str, Enum):
    RETRIEVED = "retrieved"
    COMPUTED = "computed"
    AMBIGUOUS = "ambiguous"
    NOT_FOUND = "not_found"


@dataclass(frozen=True)
class CorrectionOutcome:
    """Result of correcting one belief state."""

    belief: BeliefState
    status: CorrectionStatus
    candidates: int
    record_id: int | None = None
    reason: str | None = None

    @property
    def resolved(self) -> bool:
        return self.status in (CorrectionStatus.RETRIEVED, CorrectionStatus.COMPUTED)


def _requested_amount(belief: BeliefState, record) -> tuple[float, str, bool]:
    """Weight and metric to answer for; absent values default to the standard serving."""
    weight = record.serving_weight
    metric = record.serving_metric
    defaulted = True
    raw_weight = belief.slots.get(Slot.FOODWEIGHT)
    if raw_weight is not None:
        try:
            parsed = float(raw_weight)
        except ValueError:
            parsed = 0.0
        if parsed > 0:
            weight = parsed
            defaulted = False
    if not defaulted:
        metric = belief.slots.get(Slot.METRIC, record.serving_metric)
    return weight, metric, defaulted


def correct(predicted: BeliefState, kb: KnowledgeBase, units: UnitTable) -> CorrectionOutcome:
    """Correct the salt value of a predicted belief against the knowledge base.

    The outcome's salt is a function of the non-salt slots only; whatever salt
    the predictor guessed never influences the result.
    """
    belief = predicted.copy()
    if Slot.FOOD not in belief.slots:
        return CorrectionOutcome(belief, CorrectionStatus.NOT_FOUND, 0, reason="no food slot")
    constraints = {Relation(slot.value): value for slot, value in belief.relation_slots().items()}
    matches = lookup(kb, constraints)
    if not matches:
        return CorrectionOutcome(belief, CorrectionStatus.NOT_FOUND, 0, reason="no matching record")
    if len(matches) > 1:
        return CorrectionOutcome(belief, CorrectionStatus.AMBIGUOUS, len(matches))
    record = matches[0]
    weight, metric, _ = _requested_amount(belief, record)
    standard = (
        units.canonical(metric) == units.canonical(record.serving_metric)
        and abs(weight - record.serving_weight) <= STANDARD_WEIGHT_RTOL * record.serving_weight
    )
    if standard:
        belief.salt_value = record.salt_mg
        return CorrectionOutcome(belief, CorrectionStatus.RETRIEVED, 1, record_id=record.id)
    try:
        belief.salt_value = salt_for(record, weight, metric, units)
    except UnitMismatch as exc:
        return CorrectionOutcome(predicted.copy(), CorrectionStatus.NOT_FOUND, 1, record_id=record.id, reason=str(exc))
    return CorrectionOutcome(belief, CorrectionStatus.COMPUTED, 1, record_id=record.id)


def correct_corpus(
    predictions: Sequence[BeliefState],
    gold_dialogues: Sequence,
    kb: KnowledgeBase,
    units: UnitTable,
) -> list[CorrectionOutcome]:
    """Element-wise correct(), aligned 1:1 with final-turn gold beliefs."""
    if len(predictions) != len(gold_dialogues):
        raise AlignmentError(
            f"{len(predictions)} predictions vs {len(gold_dialogues)} dialogues"
        )
    return [correct(prediction, kb, units) for prediction in predictions]
