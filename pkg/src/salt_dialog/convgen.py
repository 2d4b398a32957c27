"""Template-based generation of annotated salt-inquiry dialogues.

Each dialogue targets one knowledge-base record and a requested amount.  The
user opens with a question drawn from the initial templates, the system asks
clarification questions about slots it still needs, and the user answers with
matching, random, or changing turns.  Every user turn carries its cumulative
gold belief state; the closing system turn informs the salt value.

Gold belief slots contain exactly what was uttered.  The gold salt value of a
turn is what symbolic correction derives from those slots (None while the
conversation is still ambiguous), so a perfect tracker plus correction scores
a perfect joint accuracy by construction.
"""
from __future__ import annotations

import json
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import nscorrect
from .belief import RELATION_SLOTS, SLOT_ORDER, BeliefState, Slot
from .foodkb import (
    FoodRecord,
    KnowledgeBase,
    Relation,
    UnitTable,
    denormalize_term,
    format_mg,
    format_weight,
    lookup,
    salt_for,
)
from .templates import TemplatePack, placeholders, render_template

#: Surface unit names offered when sampling a non-standard request.
SAMPLED_UNITS = ("grams", "ounces", "pounds")

TURN_TYPE_INITIAL = "initial"
TURN_TYPE_MATCHING = "matching"
TURN_TYPE_RANDOM = "random"
TURN_TYPE_CHANGING = "changing"


class CorpusFormatError(Exception):
    """A corpus file violates the dialogue JSON schema."""

    def __init__(self, message: str, dialogue_index: int | None = None, turn_index: int | None = None):
        where = ""
        if dialogue_index is not None:
            where = f" (dialogue {dialogue_index}"
            where += f", turn {turn_index})" if turn_index is not None else ")"
        super().__init__(message + where)
        self.dialogue_index = dialogue_index
        self.turn_index = turn_index


@dataclass(frozen=True)
class GenConfig:
    """Corpus generation knobs.

    The turn-type rates apply per user answer turn.  default_slot_values are
    the values assumed for slots never asked before the inform; the requested
    weight and metric fall back to the goal record's standard serving.
    """

    seed: int = 0
    n_dialogues: int = 1
    random_turn_rate: float = 0.0045
    changing_turn_rate: float = 0.0045
    max_questions: int = 4
    default_slot_values: Mapping[Slot, str] = field(
        default_factory=lambda: {Slot.COOK: "raw"}
    )

    def __post_init__(self) -> None:
        if self.n_dialogues < 1:
            raise ValueError("n_dialogues must be >= 1")
        if self.max_questions < 1:
            raise ValueError("max_questions must be >= 1")
        for rate in (self.random_turn_rate, self.changing_turn_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"turn-type rate out of [0, 1]: {rate}")
        if self.random_turn_rate + self.changing_turn_rate > 1.0:
            raise ValueError("turn-type rates sum above 1")


@dataclass
class SystemAction:
    kind: str  # "request" | "inform"
    slot: Slot | None = None
    payload: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "request" and self.slot is None:
            raise ValueError("request action needs a slot")
        if self.kind == "inform" and self.payload is None:
            raise ValueError("inform action needs a payload")
        if self.kind not in ("request", "inform"):
            raise ValueError(f"unknown action kind: {self.kind}")


@dataclass
class Turn:
    speaker: str  # "user" | "system"
    utterance: str
    belief: BeliefState | None = None  # user turns: cumulative gold belief
    action: SystemAction | None = None  # system turns
    turn_type: str | None = None  # user turns


@dataclass
class DialogueGoal:
    record_id: int
    weight: float
    metric: str
    salt_mg: float


@dataclass
class Dialogue:
    id: str
    goal: DialogueGoal
    turns: list[Turn]

    def user_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.speaker == "user"]

    def final_user_belief(self) -> BeliefState:
        return self.user_turns()[-1].belief


@dataclass
class GoalState:
    """Generation-time goal: the record under discussion and the requested amount.

    Changing answers may swap the record or the weight mid-dialogue, so this
    is mutable while a dialogue is being built.
    """

    record: FoodRecord
    weight: float
    metric: str
    weight_communicated: bool = False

    def final_amount(self) -> tuple[float, str]:
        """Requested amount, defaulting to the standard serving when never uttered."""
        if self.weight_communicated:
            return self.weight, self.metric
        return self.record.serving_weight, self.record.serving_metric

    def requestable_slots(self) -> list[Slot]:
        """Slots the system may ask about: the record's relations plus the weight.

        The metric always rides along with a weight answer, and a relation the
        record lacks (a raw-only food without a cook segment, say) is never
        requested.
        """
        applicable = {Slot(rel.value) for rel in self.record.slots}
        applicable.add(Slot.FOODWEIGHT)
        return [s for s in SLOT_ORDER if s in applicable]


@dataclass
class UserReply:
    utterance: str
    belief_delta: dict[Slot, str]
    turn_type: str


@dataclass
class CorpusStats:
    n_dialogues: int
    total_turns: int
    avg_turns: float
    slot_count: int
    turn_type_counts: dict[str, int]
    random_feasible_turns: int
    changing_feasible_turns: int


@dataclass
class _Tally:
    counts: dict[str, int] = field(
        default_factory=lambda: {
            TURN_TYPE_INITIAL: 0,
            TURN_TYPE_MATCHING: 0,
            TURN_TYPE_RANDOM: 0,
            TURN_TYPE_CHANGING: 0,
        }
    )
    random_feasible: int = 0
    changing_feasible: int = 0


def next_system_action(
    goal: GoalState,
    filled: BeliefState,
    asked: set[Slot],
    rng: random.Random,
    *,
    questions_asked: int = 0,
    config: GenConfig | None = None,
    units: UnitTable | None = None,
) -> SystemAction:
    """Choose the system's next move: request an open slot or inform.

    Requests sample uniformly among applicable, unfilled, unasked slots; once
    every open slot has been asked at least once (a random answer can leave an
    asked slot unfilled) the open ones become eligible again.  When nothing is
    open, or the question budget is spent, the goal's salt value is informed.
    """
    config = config or GenConfig()
    units = units or UnitTable.default()
    remaining = [s for s in goal.requestable_slots() if s not in filled.slots]
    if not remaining or questions_asked >= config.max_questions:
        weight, metric = goal.final_amount()
        payload = format_mg(salt_for(goal.record, weight, metric, units))
        return SystemAction(kind="inform", payload=payload)
    unasked = [s for s in remaining if s not in asked]
    pool = unasked or remaining
    return SystemAction(kind="request", slot=rng.choice(pool))


def _changing_options(
    goal: GoalState, filled: BeliefState, kb: KnowledgeBase
) -> list[tuple[Slot, str, list[FoodRecord]]]:
    """Feasible belief revisions: (slot, new value, records matching the revision)."""
    options: list[tuple[Slot, str, list[FoodRecord]]] = []
    if goal.weight_communicated and Slot.FOODWEIGHT in filled.slots:
        options.append((Slot.FOODWEIGHT, "", [goal.record]))
    constraints = {Relation(s.value): v for s, v in filled.relation_slots().items()}
    for slot in RELATION_SLOTS:
        if slot not in filled.slots:
            continue
        relation = Relation(slot.value)
        for alternative in kb.vocabulary(relation):
            if alternative == filled.slots[slot]:
                continue
            revised = dict(constraints)
            revised[relation] = alternative
            matches = lookup(kb, revised)
            if matches:
                options.append((slot, alternative, matches))
    return options


def sample_user_reply(
    requested: Slot,
    goal: GoalState,
    turn_type: str,
    rng: random.Random,
    *,
    kb: KnowledgeBase,
    pack: TemplatePack,
    filled: BeliefState,
) -> UserReply:
    """Produce the user's reply to a slot request.

    matching answers the requested slot from the goal; random answers a
    different unfilled slot (falling back to matching when none exists);
    changing revises an earlier answer and retargets the goal accordingly.
    The belief delta reflects exactly the uttered content.
    """
    if turn_type == TURN_TYPE_RANDOM:
        others = [
            s
            for s in goal.requestable_slots()
            if s != requested and s not in filled.slots
        ]
        if others:
            target = rng.choice(others)
            reply = _answer_slot(target, goal, pack, rng, category="answer")
            reply.turn_type = TURN_TYPE_RANDOM
            return reply
        turn_type = TURN_TYPE_MATCHING

    if turn_type == TURN_TYPE_CHANGING:
        options = _changing_options(goal, filled, kb)
        if options:
            slot, new_value, matches = rng.choice(options)
            if slot == Slot.FOODWEIGHT:
                new_weight = float(rng.randint(10, 500))
                while new_weight == goal.weight:
                    new_weight = float(rng.randint(10, 500))
                goal.weight = new_weight
                goal.weight_communicated = True
                delta = {
                    Slot.FOODWEIGHT: format_weight(goal.weight),
                    Slot.METRIC: goal.metric,
                }
                bindings = {
                    "foodweight": format_weight(goal.weight),
                    "metric": goal.metric,
                }
            else:
                goal.record = rng.choice(matches)
                delta = {slot: new_value}
                bindings = {slot.value: denormalize_term(new_value)}
            template = rng.choice(pack.change[slot])
            return UserReply(render_template(template, bindings), delta, TURN_TYPE_CHANGING)
        turn_type = TURN_TYPE_MATCHING

    reply = _answer_slot(requested, goal, pack, rng, category="answer")
    reply.turn_type = TURN_TYPE_MATCHING
    return reply


def _answer_slot(
    slot: Slot, goal: GoalState, pack: TemplatePack, rng: random.Random, category: str
) -> UserReply:
    templates = pack.answer[slot] if category == "answer" else pack.change[slot]
    template = rng.choice(templates)
    if slot == Slot.FOODWEIGHT:
        goal.weight_communicated = True
        delta = {
            Slot.FOODWEIGHT: format_weight(goal.weight),
            Slot.METRIC: goal.metric,
        }
        bindings = {"foodweight": format_weight(goal.weight), "metric": goal.metric}
    else:
        value = goal.record.slots[Relation(slot.value)]
        delta = {slot: value}
        bindings = {slot.value: denormalize_term(value)}
    return UserReply(render_template(template, bindings), delta, TURN_TYPE_MATCHING)


def _resolved_salt(belief: BeliefState, kb: KnowledgeBase, units: UnitTable) -> float | None:
    """Gold salt for a belief: the symbolic-correction result, None if open."""
    outcome = nscorrect.correct(BeliefState(slots=dict(belief.slots)), kb, units)
    return outcome.belief.salt_value if outcome.resolved else None


def _opening_turn(
    goal: GoalState, pack: TemplatePack, rng: random.Random
) -> tuple[str, dict[Slot, str]]:
    fillable = {"nutrient", "food", "foodweight", "metric"}
    for relation in goal.record.slots:
        fillable.add(relation.value)
    candidates = [t for t in pack.initial if set(placeholders(t)) <= fillable]
    template = rng.choice(candidates)
    names = placeholders(template)
    bindings: dict[str, str] = {"nutrient": "salt"}
    delta: dict[Slot, str] = {Slot.FOOD: goal.record.slots[Relation.FOOD]}
    for name in names:
        if name == "nutrient":
            continue
        if name == "foodweight":
            bindings[name] = format_weight(goal.weight)
            delta[Slot.FOODWEIGHT] = format_weight(goal.weight)
            goal.weight_communicated = True
        elif name == "metric":
            bindings[name] = goal.metric
            delta[Slot.METRIC] = goal.metric
        else:
            slot = Slot(name)
            value = goal.record.slots[Relation(name)]
            bindings[name] = denormalize_term(value)
            delta[slot] = value
    return render_template(template, bindings), delta


def _generate(
    kb: KnowledgeBase,
    config: GenConfig,
    rng: random.Random,
    dialogue_id: str,
    units: UnitTable,
    pack: TemplatePack,
    tally: _Tally,
) -> Dialogue:
    if not len(kb):
        raise ValueError("cannot generate dialogues from an empty knowledge base")
    record = rng.choice(list(kb.records))
    if rng.random() < 0.5 or not units.is_weight_unit(record.serving_metric):
        goal = GoalState(record, record.serving_weight, record.serving_metric)
    else:
        metric = rng.choice(SAMPLED_UNITS)
        goal = GoalState(record, float(rng.randint(10, 500)), metric)

    utterance, delta = _opening_turn(goal, pack, rng)
    belief = BeliefState(slots=delta)
    belief.salt_value = _resolved_salt(belief, kb, units)
    turns = [Turn("user", utterance, belief=belief.copy(), turn_type=TURN_TYPE_INITIAL)]
    tally.counts[TURN_TYPE_INITIAL] += 1

    asked: set[Slot] = set()
    questions = 0
    while True:
        action = next_system_action(
            goal, belief, asked, rng, questions_asked=questions, config=config, units=units
        )
        if action.kind == "inform":
            food = denormalize_term(goal.record.slots[Relation.FOOD])
            weight, metric = goal.final_amount()
            text = render_template(
                pack.inform[0],
                {
                    "food": food,
                    "salt": action.payload,
                    "foodweight": format_weight(weight),
                    "metric": metric,
                },
            )
            turns.append(Turn("system", text, action=action))
            goal_row = DialogueGoal(
                record_id=goal.record.id,
                weight=weight,
                metric=metric,
                salt_mg=salt_for(goal.record, weight, metric, units),
            )
            return Dialogue(id=dialogue_id, goal=goal_row, turns=turns)

        questions += 1
        asked.add(action.slot)
        request_template = rng.choice(pack.request[action.slot])
        request_text = render_template(
            request_template, {"food": denormalize_term(goal.record.slots[Relation.FOOD])}
        )
        turns.append(Turn("system", request_text, action=action))

        others_open = [
            s for s in goal.requestable_slots() if s != action.slot and s not in belief.slots
        ]
        if others_open:
            tally.random_feasible += 1
        if _changing_options(goal, belief, kb):
            tally.changing_feasible += 1

        draw = rng.random()
        if draw < config.random_turn_rate:
            sampled = TURN_TYPE_RANDOM
        elif draw < config.random_turn_rate + config.changing_turn_rate:
            sampled = TURN_TYPE_CHANGING
        else:
            sampled = TURN_TYPE_MATCHING
        reply = sample_user_reply(
            action.slot, goal, sampled, rng, kb=kb, pack=pack, filled=belief
        )
        belief.slots.update(reply.belief_delta)
        belief.salt_value = _resolved_salt(belief, kb, units)
        turns.append(
            Turn("user", reply.utterance, belief=belief.copy(), turn_type=reply.turn_type)
        )
        tally.counts[reply.turn_type] += 1


def generate_dialogue(
    kb: KnowledgeBase,
    config: GenConfig,
    rng: random.Random,
    *,
    dialogue_id: str = "dlg00001",
    units: UnitTable | None = None,
    pack: TemplatePack | None = None,
) -> Dialogue:
    """Generate a single dialogue using the supplied random stream."""
    return _generate(
        kb,
        config,
        rng,
        dialogue_id,
        units or UnitTable.default(),
        pack or TemplatePack.default(),
        _Tally(),
    )


def generate_corpus(
    kb: KnowledgeBase,
    config: GenConfig,
    *,
    units: UnitTable | None = None,
    pack: TemplatePack | None = None,
) -> tuple[list[Dialogue], CorpusStats]:
    """Generate config.n_dialogues dialogues, fully determined by config.seed.

    Each dialogue draws from its own sub-seeded stream, so generation order
    (or a future parallel map) cannot change the corpus.
    """
    units = units or UnitTable.default()
    pack = pack or TemplatePack.default()
    tally = _Tally()
    dialogues = []
    for index in range(config.n_dialogues):
        rng = random.Random(f"{config.seed}:{index}")
        dialogues.append(
            _generate(kb, config, rng, f"dlg{index + 1:05d}", units, pack, tally)
        )
    total_turns = sum(len(d.turns) for d in dialogues)
    stats = CorpusStats(
        n_dialogues=len(dialogues),
        total_turns=total_turns,
        avg_turns=total_turns / len(dialogues),
        slot_count=len(Slot),
        turn_type_counts=dict(tally.counts),
        random_feasible_turns=tally.random_feasible,
        changing_feasible_turns=tally.changing_feasible,
    )
    return dialogues, stats


def corpus_to_payload(corpus: Sequence[Dialogue]) -> dict:
    dialogues = []
    for dialogue in corpus:
        turns = []
        for turn in dialogue.turns:
            row: dict = {"speaker": turn.speaker, "utterance": turn.utterance}
            if turn.speaker == "user":
                row["turn_type"] = turn.turn_type
                belief: dict = {"slots": {s.value: v for s, v in turn.belief.slots.items()}}
                if turn.belief.salt_value is not None:
                    belief["salt_value"] = turn.belief.salt_value
                row["belief"] = belief
            else:
                action: dict = {"kind": turn.action.kind}
                if turn.action.slot is not None:
                    action["slot"] = turn.action.slot.value
                if turn.action.payload is not None:
                    action["payload"] = turn.action.payload
                row["action"] = action
            turns.append(row)
        dialogues.append(
            {
                "id": dialogue.id,
                "goal": {
                    "record_id": dialogue.goal.record_id,
                    "weight": dialogue.goal.weight,
                    "metric": dialogue.goal.metric,
                    "salt_mg": dialogue.goal.salt_mg,
                },
                "turns": turns,
            }
        )
    return {"dialogues": dialogues}


def export_corpus(corpus: Sequence[Dialogue], path: str | Path) -> None:
    """Write the corpus as deterministic JSON (same corpus, same bytes)."""
    payload = corpus_to_payload(corpus)
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _parse_turn(row: dict, dialogue_index: int, turn_index: int) -> Turn:
    try:
        speaker = row["speaker"]
        utterance = row["utterance"]
    except (KeyError, TypeError):
        raise CorpusFormatError("turn missing speaker/utterance", dialogue_index, turn_index)
    if speaker == "user":
        if "belief" not in row or "slots" not in row["belief"]:
            raise CorpusFormatError("user turn missing gold belief", dialogue_index, turn_index)
        try:
            belief = BeliefState(
                slots={Slot(s): v for s, v in row["belief"]["slots"].items()},
                salt_value=row["belief"].get("salt_value"),
            )
        except ValueError as exc:
            raise CorpusFormatError(f"bad belief: {exc}", dialogue_index, turn_index)
        return Turn("user", utterance, belief=belief, turn_type=row.get("turn_type"))
    if speaker == "system":
        if "action" not in row:
            raise CorpusFormatError("system turn missing action", dialogue_index, turn_index)
        action_row = row["action"]
        try:
            action = SystemAction(
                kind=action_row["kind"],
                slot=Slot(action_row["slot"]) if "slot" in action_row else None,
                payload=action_row.get("payload"),
            )
        except (KeyError, ValueError) as exc:
            raise CorpusFormatError(f"bad action: {exc}", dialogue_index, turn_index)
        return Turn("system", utterance, action=action)
    raise CorpusFormatError(f"unknown speaker: {speaker!r}", dialogue_index, turn_index)


def import_corpus(path: str | Path) -> list[Dialogue]:
    """Read a corpus file back; import(export(c)) == c."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"not valid JSON: {exc}")
    if not isinstance(data, dict) or "dialogues" not in data:
        raise CorpusFormatError("missing top-level 'dialogues'")
    corpus = []
    for d_index, row in enumerate(data["dialogues"]):
        try:
            goal_row = row["goal"]
            goal = DialogueGoal(
                record_id=int(goal_row["record_id"]),
                weight=float(goal_row["weight"]),
                metric=goal_row["metric"],
                salt_mg=float(goal_row["salt_mg"]),
            )
            dialogue_id = row["id"]
            turn_rows = row["turns"]
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"bad dialogue: {exc}", d_index)
        turns = [
            _parse_turn(turn_row, d_index, t_index) for t_index, turn_row in enumerate(turn_rows)
        ]
        corpus.append(Dialogue(id=dialogue_id, goal=goal, turns=turns))
    return corpus


def mean_turns(corpus: Iterable[Dialogue]) -> float:
    return statistics.mean(len(d.turns) for d in corpus)
