"""Evaluation metrics: inform/success rates, corpus BLEU, joint goal accuracy,
and SMOG / FKGL / FKRE readability.

Everything here is pure and deterministic.  BLEU smoothing, tokenization, and
the syllable heuristic are pinned so the numbers are reproducible bit-for-bit
within this artifact.
"""
from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .belief import AlignmentError, BeliefState

logger = logging.getLogger(__name__)

#: Replaces zero modified n-gram precisions before the geometric mean.
BLEU_EPSILON = 1e-9

#: Relative tolerance on delivered salt for a dialogue to count as successful.
SUCCESS_SALT_RTOL = 0.005

#: SMOG was calibrated on 30-sentence samples; shorter corpora get a warning.
SMOG_MIN_SENTENCES = 30


class MetricUndefined(Exception):
    """A metric was requested on degenerate input (empty corpus, no words)."""


@dataclass(frozen=True)
class DialogueOutcome:
    """Per-dialogue evaluation inputs for the inform/success rates."""

    resolved_record_id: int | None
    delivered_salt: float | None
    gold_record_id: int
    gold_salt: float


@dataclass(frozen=True)
class MetricsReport:
    inform: float  # percent
    success: float  # percent
    bleu: float  # [0, 1]
    joint_accuracy: float  # percent
    readability: dict[str, float]  # {"smog", "fkgl", "fkre"}

    def to_dict(self) -> dict:
        return {
            "inform": self.inform,
            "success": self.success,
            "bleu": self.bleu,
            "joint_accuracy": self.joint_accuracy,
            "readability": dict(self.readability),
        }


def _beliefs_equal(a: BeliefState, b: BeliefState) -> bool:
    return a.slots == b.slots and a.salt_value == b.salt_value


def joint_accuracy(pred: Sequence[BeliefState], gold: Sequence[BeliefState]) -> float:
    """Percent of turns whose predicted slots AND salt exactly match gold."""
    if len(pred) != len(gold):
        raise AlignmentError(f"{len(pred)} predicted turns vs {len(gold)} gold turns")
    if not pred:
        raise MetricUndefined("joint accuracy is undefined on zero turns")
    matches = sum(1 for p, g in zip(pred, gold) if _beliefs_equal(p, g))
    return 100.0 * matches / len(pred)


def salt_close(delivered: float | None, gold: float) -> bool:
    if delivered is None:
        return False
    return math.isclose(delivered, gold, rel_tol=SUCCESS_SALT_RTOL, abs_tol=0.0) or delivered == gold


def inform_success(outcomes: Iterable[DialogueOutcome]) -> tuple[float, float]:
    """(inform %, success %): right entity resolved; plus right salt delivered."""
    outcomes = list(outcomes)
    if not outcomes:
        raise MetricUndefined("inform/success undefined on zero dialogues")
    informed = 0
    succeeded = 0
    for outcome in outcomes:
        if outcome.resolved_record_id == outcome.gold_record_id:
            informed += 1
            if salt_close(outcome.delivered_salt, outcome.gold_salt):
                succeeded += 1
    n = len(outcomes)
    return 100.0 * informed / n, 100.0 * succeeded / n


_TOKEN = re.compile(r"[a-z0-9]+|[^a-z0-9\s]")


def bleu_tokenize(text: str) -> list[str]:
    """Lowercase tokens split on whitespace and punctuation boundaries."""
    return _TOKEN.findall(text.lower())


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(candidates: Sequence[str], references: Sequence[str]) -> float:
    """Corpus-level BLEU-4 with clipping, brevity penalty, and add-epsilon smoothing.

    Modified n-gram precisions (n = 1..4) are accumulated over the whole
    corpus, zero precisions are replaced by BLEU_EPSILON, and the brevity
    penalty exp(1 - r/c) applies when the candidate corpus is shorter than
    the reference corpus.
    """
    if len(candidates) != len(references):
        raise AlignmentError(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise MetricUndefined("BLEU is undefined on an empty corpus")
    matched = [0] * 4
    total = [0] * 4
    candidate_len = 0
    reference_len = 0
    for candidate, reference in zip(candidates, references):
        cand_tokens = bleu_tokenize(candidate)
        ref_tokens = bleu_tokenize(reference)
        candidate_len += len(cand_tokens)
        reference_len += len(ref_tokens)
        for n in range(1, 5):
            cand_ngrams = _ngrams(cand_tokens, n)
            ref_ngrams = _ngrams(ref_tokens, n)
            total[n - 1] += sum(cand_ngrams.values())
            matched[n - 1] += sum(
                min(count, ref_ngrams.get(gram, 0)) for gram, count in cand_ngrams.items()
            )
    log_sum = 0.0
    for n in range(4):
        precision = matched[n] / total[n] if total[n] else 0.0
        if precision == 0.0:
            precision = BLEU_EPSILON
        log_sum += 0.25 * math.log(precision)
    if candidate_len == 0:
        return 0.0
    brevity = 1.0 if candidate_len >= reference_len else math.exp(1.0 - reference_len / candidate_len)
    return brevity * math.exp(log_sum)


_WORD = re.compile(r"[A-Za-z0-9'\-]+")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_VOWEL_GROUP = re.compile(r"[aeiouy]+")

#: Endings where a trailing "-es"/"-ed" is pronounced and must not be stripped.
_SOUNDED_ES = ("les", "ses", "xes", "zes", "ches", "shes", "ces", "ges")
_SOUNDED_ED = ("ted", "ded")


def count_syllables(word: str) -> int:
    """Vowel-group syllable count with silent-e, -es, -ed, and diphthong rules.

    Vowel runs (a e i o u y) count once, so diphthongs are one syllable.  A
    silent trailing "e" ("type"), "-es" ("makes"), or "-ed" ("cooked") is
    stripped first, except for endings where it is pronounced ("-ble",
    "ounces", "heated").  Tokens without vowels (numbers, "mg") count as one.
    """
    word = re.sub(r"[^a-z]", "", word.lower())
    if not word:
        return 1
    if word.endswith("e") and not word.endswith("le") and len(word) > 2:
        word = word[:-1]
    elif word.endswith("ed") and not word.endswith(_SOUNDED_ED) and len(word) > 3:
        word = word[:-2]
    elif word.endswith("es") and not word.endswith(_SOUNDED_ES) and len(word) > 3:
        word = word[:-2]
    return max(len(_VOWEL_GROUP.findall(word)), 1)


def text_counts(text: str) -> tuple[int, int, int, int]:
    """(words, sentences, syllables, polysyllabic words) for a text."""
    sentences = [s for s in _SENTENCE_SPLIT.split(text) if _WORD.search(s)]
    words = _WORD.findall(text)
    syllable_counts = [count_syllables(word) for word in words]
    polysyllables = sum(1 for count in syllable_counts if count >= 3)
    return len(words), max(len(sentences), 1 if words else 0), sum(syllable_counts), polysyllables


def readability(text: str) -> dict[str, float]:
    """SMOG, FKGL, and FKRE for a text.

    FKRE = 206.835 - 1.015 (W/S) - 84.6 (Y/W);
    FKGL = 0.39 (W/S) + 11.8 (Y/W) - 15.59;
    SMOG = 1.0430 sqrt(P * 30 / S) + 3.1291,
    with W words, S sentences, Y syllables, P polysyllabic words.
    """
    words, sentences, syllables, polysyllables = text_counts(text)
    if words == 0 or sentences == 0:
        raise MetricUndefined("readability is undefined without words")
    if sentences < SMOG_MIN_SENTENCES:
        logger.warning(
            "SMOG computed on %d sentences; below its %d-sentence validity threshold",
            sentences,
            SMOG_MIN_SENTENCES,
        )
    words_per_sentence = words / sentences
    syllables_per_word = syllables / words
    return {
        "smog": 1.0430 * math.sqrt(polysyllables * 30.0 / sentences) + 3.1291,
        "fkgl": 0.39 * words_per_sentence + 11.8 * syllables_per_word - 15.59,
        "fkre": 206.835 - 1.015 * words_per_sentence - 84.6 * syllables_per_word,
    }


def report_table(report: MetricsReport) -> str:
    """Plain-text table with the end-to-end columns plus readability."""
    header = f"{'Inform':>8} {'Success':>8} {'BLEU':>8} {'Joint Accuracy':>15}"
    row = (
        f"{report.inform:>8.2f} {report.success:>8.2f} "
        f"{report.bleu:>8.4f} {report.joint_accuracy:>15.2f}"
    )
    readability_row = (
        f"SMOG {report.readability['smog']:.2f}  "
        f"FKGL {report.readability['fkgl']:.2f}  "
        f"FKRE {report.readability['fkre']:.2f}"
    )
    return "\n".join([header, row, readability_row])
