"""End-to-end evaluation drivers: run a predictor over a corpus, optionally
apply symbolic correction, and score the result with the standard metrics.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from . import nscorrect
from .belief import BeliefState, Slot
from .convgen import Dialogue
from .dst import (
    CorruptionConfig,
    DialogueContext,
    corrupting_predict,
    kb_slot_vocabulary,
    reference_track,
)
from .evalx import DialogueOutcome, MetricsReport, corpus_bleu, inform_success, joint_accuracy, readability
from .foodkb import (
    KnowledgeBase,
    Relation,
    UnitTable,
    denormalize_term,
    format_mg,
    format_weight,
    lookup,
)
from .templates import TemplatePack, render_template


def user_contexts(dialogue: Dialogue) -> list[DialogueContext]:
    """Dialogue-context prefixes, one ending at each user turn."""
    contexts = []
    prefix: list[tuple[str, str]] = []
    for turn in dialogue.turns:
        prefix.append((turn.speaker, turn.utterance))
        if turn.speaker == "user":
            contexts.append(DialogueContext(turns=tuple(prefix)))
    return contexts


def gold_turn_beliefs(dialogue: Dialogue) -> list[BeliefState]:
    return [turn.belief for turn in dialogue.user_turns()]


def reference_beliefs(
    corpus: Sequence[Dialogue],
    kb: KnowledgeBase,
    pack: TemplatePack,
    units: UnitTable,
) -> list[list[BeliefState]]:
    """Reference-tracker predictions for every user turn of every dialogue."""
    return [
        [reference_track(context, kb, pack, units) for context in user_contexts(dialogue)]
        for dialogue in corpus
    ]


def corrupted_beliefs(
    corpus: Sequence[Dialogue],
    kb: KnowledgeBase,
    cfg: CorruptionConfig,
) -> list[list[BeliefState]]:
    """Corrupting-predictor outputs, seeded by cfg.seed; order is canonical."""
    rng = random.Random(cfg.seed)
    vocab = kb_slot_vocabulary(kb)
    return [
        [corrupting_predict(belief, cfg, rng, vocab) for belief in gold_turn_beliefs(dialogue)]
        for dialogue in corpus
    ]


def resolve_without_correction(
    belief: BeliefState, kb: KnowledgeBase
) -> tuple[int | None, float | None]:
    """Entity resolution a correction-free system performs on DST output."""
    constraints = {Relation(s.value): v for s, v in belief.relation_slots().items()}
    if Relation.FOOD not in constraints:
        return None, belief.salt_value
    matches = lookup(kb, constraints)
    if len(matches) == 1:
        return matches[0].id, belief.salt_value
    return None, belief.salt_value


def _candidate_inform(
    belief: BeliefState,
    record_id: int | None,
    delivered: float | None,
    kb: KnowledgeBase,
    pack: TemplatePack,
) -> str:
    """Render the inform sentence a system would emit for a predicted belief."""
    if record_id is None or delivered is None:
        return pack.not_found[0]
    record = kb.by_id(record_id)
    weight_text = belief.slots.get(Slot.FOODWEIGHT, format_weight(record.serving_weight))
    metric = belief.slots.get(Slot.METRIC, record.serving_metric)
    return render_template(
        pack.inform[0],
        {
            "food": denormalize_term(record.slots[Relation.FOOD]),
            "salt": format_mg(delivered),
            "foodweight": weight_text,
            "metric": denormalize_term(metric),
        },
    )


@dataclass(frozen=True)
class EvaluationDetail:
    """Everything evaluate_beliefs computed, for inspection beyond the report."""

    report: MetricsReport
    outcomes: list[DialogueOutcome]
    corrected: list[list[BeliefState]] | None


def evaluate_beliefs(
    corpus: Sequence[Dialogue],
    predictions: Sequence[Sequence[BeliefState]],
    kb: KnowledgeBase,
    *,
    ns_correct: bool,
    units: UnitTable | None = None,
    pack: TemplatePack | None = None,
) -> EvaluationDetail:
    """Score per-turn predicted beliefs against a gold corpus."""
    units = units or UnitTable.default()
    pack = pack or TemplatePack.default()
    flat_pred: list[BeliefState] = []
    flat_gold: list[BeliefState] = []
    outcomes: list[DialogueOutcome] = []
    candidates: list[str] = []
    references: list[str] = []
    corrected_all: list[list[BeliefState]] | None = [] if ns_correct else None

    for dialogue, turn_beliefs in zip(corpus, predictions):
        golds = gold_turn_beliefs(dialogue)
        if len(golds) != len(turn_beliefs):
            raise ValueError(f"dialogue {dialogue.id}: prediction/turn count mismatch")
        if ns_correct:
            corrected = [nscorrect.correct(b, kb, units).belief for b in turn_beliefs]
            corrected_all.append(corrected)
            flat_pred.extend(corrected)
        else:
            flat_pred.extend(turn_beliefs)
        flat_gold.extend(golds)

        final_pred = turn_beliefs[-1]
        if ns_correct:
            outcome = nscorrect.correct(final_pred, kb, units)
            record_id = outcome.record_id if outcome.resolved else None
            delivered = outcome.belief.salt_value if outcome.resolved else final_pred.salt_value
        else:
            record_id, delivered = resolve_without_correction(final_pred, kb)
        outcomes.append(
            DialogueOutcome(
                resolved_record_id=record_id,
                delivered_salt=delivered,
                gold_record_id=dialogue.goal.record_id,
                gold_salt=dialogue.goal.salt_mg,
            )
        )
        references.append(dialogue.turns[-1].utterance)
        candidates.append(_candidate_inform(final_pred, record_id, delivered, kb, pack))

    inform, success = inform_success(outcomes)
    system_text = " ".join(
        turn.utterance for dialogue in corpus for turn in dialogue.turns if turn.speaker == "system"
    )
    report = MetricsReport(
        inform=inform,
        success=success,
        bleu=corpus_bleu(candidates, references),
        joint_accuracy=joint_accuracy(flat_pred, flat_gold),
        readability=readability(system_text),
    )
    return EvaluationDetail(report=report, outcomes=outcomes, corrected=corrected_all)


def evaluate_corpus(
    corpus: Sequence[Dialogue],
    kb: KnowledgeBase,
    *,
    predictor: str = "reference",
    ns_correct: bool = True,
    corruption: CorruptionConfig | None = None,
    units: UnitTable | None = None,
    pack: TemplatePack | None = None,
) -> MetricsReport:
    """Run the configured predictor over a corpus and compute the metrics report."""
    units = units or UnitTable.default()
    pack = pack or TemplatePack.default()
    if predictor == "reference":
        predictions = reference_beliefs(corpus, kb, pack, units)
    elif predictor == "corrupting":
        predictions = corrupted_beliefs(corpus, kb, corruption or CorruptionConfig())
    else:
        raise ValueError(f"unknown predictor: {predictor!r}")
    detail = evaluate_beliefs(
        corpus, predictions, kb, ns_correct=ns_correct, units=units, pack=pack
    )
    return detail.report
