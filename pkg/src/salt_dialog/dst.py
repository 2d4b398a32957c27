"""Belief-state tracking: serialization, a deterministic reference tracker,
a corrupting predictor, and the wire protocol for external neural predictors.

The reference tracker is template-anchored rather than learned: it matches
user utterances against the same template pack the corpus generator uses, so
it reproduces gold slot maps exactly and isolates the effect of symbolic salt
correction.  The corrupting predictor emulates a fine-tuned model that gets
slots mostly right but guesses salt values at random.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass

import httpx

from .belief import SLOT_ORDER, BeliefState, Slot
from .foodkb import KnowledgeBase, Relation, UnitTable, normalize_term
from .templates import TemplatePack, compile_user_patterns, iter_matches

#: Task prefix sent to an external DST predictor.
DST_PROMPT = "translate dialogue to belief state:"


class BeliefParseError(Exception):
    """A serialized belief string has no recognizable structure."""


class PredictorUnavailable(Exception):
    """The remote predictor endpoint could not be reached."""


@dataclass(frozen=True)
class DialogueContext:
    """Ordered (speaker, utterance) pairs, alternating and starting with the user."""

    turns: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        for index, (speaker, _) in enumerate(self.turns):
            expected = "user" if index % 2 == 0 else "system"
            if speaker != expected:
                raise ValueError(
                    f"context turn {index} should be {expected!r}, got {speaker!r}"
                )

    def user_utterances(self) -> list[str]:
        return [utterance for speaker, utterance in self.turns if speaker == "user"]


@dataclass(frozen=True)
class PredictorRequest:
    context: DialogueContext
    prompt: str = DST_PROMPT

    def to_payload(self) -> dict:
        return {"prompt": self.prompt, "context": [list(pair) for pair in self.context.turns]}


@dataclass(frozen=True)
class PredictorResponse:
    belief: str


@dataclass(frozen=True)
class CorruptionConfig:
    """How badly to corrupt gold beliefs when emulating a neural predictor."""

    salt_corrupt_prob: float = 1.0
    slot_corrupt_prob: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        for prob in (self.salt_corrupt_prob, self.slot_corrupt_prob):
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"probability out of [0, 1]: {prob}")


def serialize_belief(belief: BeliefState) -> str:
    """Canonical text form: "[food=pork; cook=broiled; value=81]", "[]" when empty."""
    parts = [f"{slot.value}={belief.slots[slot]}" for slot in SLOT_ORDER if slot in belief.slots]
    if belief.salt_value is not None:
        parts.append(f"value={format_salt_token(belief.salt_value)}")
    return "[" + "; ".join(parts) + "]"


def format_salt_token(value: float) -> str:
    """Full-precision salt token that round-trips through parse_belief."""
    if value == int(value):
        return str(int(value))
    return repr(value)


def parse_belief(text: str) -> tuple[BeliefState, list[str]]:
    """Parse a serialized belief; returns the belief plus tolerated warnings.

    Whitespace is ignored, unknown slot names are collected as warnings, and
    text without the bracketed slot=value structure raises BeliefParseError.
    """
    stripped = text.strip()
    if not (stripped.startswith("[") and stripped.endswith("]")):
        raise BeliefParseError(f"not a belief string: {text!r}")
    inner = stripped[1:-1].strip()
    belief = BeliefState()
    warnings: list[str] = []
    if not inner:
        return belief, warnings
    for item in inner.split(";"):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            warnings.append(f"unparseable entry: {item!r}")
            continue
        name, value = item.split("=", 1)
        name = name.strip().lower()
        value = value.strip()
        if name == "value":
            try:
                salt = float(value)
            except ValueError:
                warnings.append(f"bad salt value: {value!r}")
                continue
            if salt < 0:
                warnings.append(f"negative salt value: {value!r}")
                continue
            belief.salt_value = salt
            continue
        try:
            slot = Slot(name)
        except ValueError:
            warnings.append(f"unknown slot: {name!r}")
            continue
        belief.slots[slot] = normalize_term(value)
    return belief, warnings


class _SlotValidator:
    """Checks captured template values against the KB vocabulary."""

    _NUMBER = re.compile(r"\d+(?:\.\d+)?$")

    def __init__(self, kb: KnowledgeBase, units: UnitTable):
        self.vocab = {
            slot: set(kb.vocabulary(Relation(slot.value)))
            for slot in (Slot.FOOD, Slot.COOK, Slot.TYPE, Slot.ANIMAL, Slot.PART)
        }
        self.units = units
        self.known_units = set(kb.serving_metrics())

    def validate(self, name: str, raw: str) -> str | None:
        """Normalized slot value, or None when the capture is not plausible."""
        if name == "nutrient":
            return normalize_term(raw) if normalize_term(raw) == "salt" else None
        if name == "foodweight":
            return raw if self._NUMBER.match(raw.strip()) else None
        if name == "metric":
            unit = normalize_term(raw)
            if self.units.is_weight_unit(unit) or unit in self.known_units:
                return unit
            return None
        if name == "food":
            # Foods outside the KB must still reach the belief so that lookup
            # can report them as not found instead of the tracker eating them.
            value = normalize_term(raw)
            return value or None
        slot = Slot(name)
        value = normalize_term(raw)
        return value if value in self.vocab.get(slot, ()) else None


def reference_track(
    context: DialogueContext,
    kb: KnowledgeBase,
    pack: TemplatePack,
    units: UnitTable | None = None,
) -> BeliefState:
    """Deterministic DST: extract slots by matching utterances to templates.

    Every user utterance is tried against the pack's user-side patterns (most
    specific first); a pattern counts only if all its captures validate
    against the KB vocabulary.  Later mentions of a slot replace earlier ones,
    which is exactly the changing-answer rule.  The salt value is left unset:
    filling it is the corrector's job.
    """
    units = units or UnitTable.default()
    validator = _SlotValidator(kb, units)
    patterns = compile_user_patterns(pack)
    belief = BeliefState()
    for utterance in context.user_utterances():
        for pattern, captures in iter_matches(utterance, patterns):
            extracted: dict[Slot, str] = {}
            valid = True
            for name, raw in captures.items():
                value = validator.validate(name, raw)
                if value is None:
                    valid = False
                    break
                if name != "nutrient":
                    extracted[Slot(name)] = value
            if valid:
                belief.slots.update(extracted)
                break
    return belief


def corrupting_predict(
    gold: BeliefState,
    cfg: CorruptionConfig,
    rng: random.Random,
    vocab: dict[Slot, tuple[str, ...]],
) -> BeliefState:
    """Damage a gold belief the way a value-guessing neural model would.

    An existing salt value is replaced (with salt_corrupt_prob) by a random
    integer in [1, 200] different from gold; each filled slot with at least
    one alternative in the KB vocabulary is swapped with slot_corrupt_prob.
    Both probabilities at 0 return an exact copy.
    """
    predicted = gold.copy()
    if predicted.salt_value is not None and rng.random() < cfg.salt_corrupt_prob:
        while True:
            guess = float(rng.randint(1, 200))
            if guess != gold.salt_value:
                predicted.salt_value = guess
                break
    for slot in SLOT_ORDER:
        if slot not in predicted.slots or slot not in vocab:
            continue
        alternatives = [v for v in vocab[slot] if v != predicted.slots[slot]]
        if alternatives and rng.random() < cfg.slot_corrupt_prob:
            predicted.slots[slot] = rng.choice(alternatives)
    return predicted


def kb_slot_vocabulary(kb: KnowledgeBase) -> dict[Slot, tuple[str, ...]]:
    """Per-slot value inventory used when corrupting slot values."""
    return {
        slot: kb.vocabulary(Relation(slot.value))
        for slot in (Slot.FOOD, Slot.COOK, Slot.TYPE, Slot.ANIMAL, Slot.PART)
    }


def remote_predict(
    endpoint: str,
    request: PredictorRequest,
    *,
    timeout: float = 10.0,
    retries: int = 1,
) -> PredictorResponse:
    """POST a prediction request to an external DST service.

    The wire format is the seam where a fine-tuned seq2seq model attaches:
    request {"prompt": ..., "context": [[speaker, utterance], ...]} and
    response {"belief": "[...]"}.  Transport failures are retried once by
    default, then surface as PredictorUnavailable; a response without a
    usable belief string raises BeliefParseError.
    """
    last_error: Exception | None = None
    for _ in range(retries + 1):
        try:
            response = httpx.post(endpoint, json=request.to_payload(), timeout=timeout)
            response.raise_for_status()
        except (httpx.HTTPError, OSError) as exc:
            last_error = exc
            continue
        try:
            body = response.json()
        except ValueError as exc:
            raise BeliefParseError(f"predictor returned non-JSON body: {exc}")
        if not isinstance(body, dict) or not isinstance(body.get("belief"), str):
            raise BeliefParseError(f"predictor response missing belief: {body!r}")
        return PredictorResponse(belief=body["belief"])
    raise PredictorUnavailable(f"predictor at {endpoint} unreachable: {last_error}")
