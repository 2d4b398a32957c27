"""Live salt-inquiry chat: session store, clarification policy, template NLG,
and the HTTP API the chat UI talks to.

Sessions live in memory.  Message handling runs the configured belief
predictor over the session transcript, corrects the salt value symbolically,
and either asks the clarification question that best narrows the candidate
records or informs the corrected salt value.  The service never invents
numbers: every informed value comes out of the corrector.
"""
from __future__ import annotations

import random
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import nscorrect
from .belief import RELATION_SLOTS, SLOT_ORDER, BeliefState, Slot
from .dst import (
    BeliefParseError,
    CorruptionConfig,
    DialogueContext,
    PredictorRequest,
    PredictorUnavailable,
    corrupting_predict,
    kb_slot_vocabulary,
    parse_belief,
    reference_track,
    remote_predict,
    serialize_belief,
)
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


class SessionNotFound(Exception):
    pass


class SessionCompleted(Exception):
    pass


class SessionExpired(Exception):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    max_questions: int = 4
    predictor: str = "reference"  # reference | corrupting | remote
    endpoint: str | None = None
    ttl_seconds: float = 1800.0
    corruption: CorruptionConfig | None = None
    cors_origins: tuple[str, ...] = ("*",)

    def __post_init__(self) -> None:
        if self.max_questions < 1:
            raise ValueError("max_questions must be >= 1")
        if self.predictor == "remote" and not self.endpoint:
            raise ValueError("remote predictor needs an endpoint")


@dataclass
class Session:
    id: str
    context: list[tuple[str, str]] = field(default_factory=list)
    belief: BeliefState = field(default_factory=BeliefState)
    asked: set[Slot] = field(default_factory=set)
    status: str = "active"  # active | completed
    questions: int = 0
    created_at: float = 0.0
    last_active: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


@dataclass(frozen=True)
class Reply:
    reply: str
    belief: str
    status: str


def _split_slot(candidates, belief: BeliefState) -> Slot | None:
    """The unfilled relation slot whose values split the candidates the most."""
    best_slot = None
    best_groups = 1
    for slot in SLOT_ORDER:
        if slot not in RELATION_SLOTS or slot in belief.slots:
            continue
        relation = Relation(slot.value)
        groups = {record.slots.get(relation) for record in candidates}
        if len(groups) > best_groups:
            best_slot = slot
            best_groups = len(groups)
    return best_slot


class DialogService:
    """Session manager plus dialog policy over one knowledge base."""

    def __init__(
        self,
        kb: KnowledgeBase,
        units: UnitTable | None = None,
        pack: TemplatePack | None = None,
        policy: PolicyConfig | None = None,
        clock=time.monotonic,
    ):
        self.kb = kb
        self.units = units or UnitTable.default()
        self.pack = pack or TemplatePack.default()
        self.policy = policy or PolicyConfig()
        self.clock = clock
        self._sessions: dict[str, Session] = {}
        self._store_lock = threading.Lock()
        self._corruption_rng = random.Random(
            (self.policy.corruption or CorruptionConfig()).seed
        )
        self._vocab = kb_slot_vocabulary(kb)

    # -- session store ------------------------------------------------------

    def create_session(self) -> Session:
        now = self.clock()
        session = Session(id=uuid.uuid4().hex, created_at=now, last_active=now)
        with self._store_lock:
            self._sessions[session.id] = session
        return session

    def _get(self, session_id: str) -> Session:
        with self._store_lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise SessionNotFound(session_id)

    def _expired(self, session: Session) -> bool:
        return self.clock() - session.last_active > self.policy.ttl_seconds

    # -- prediction ---------------------------------------------------------

    def _predict(self, context: DialogueContext) -> BeliefState:
        kind = self.policy.predictor
        if kind == "reference":
            return reference_track(context, self.kb, self.pack, self.units)
        if kind == "corrupting":
            gold = reference_track(context, self.kb, self.pack, self.units)
            cfg = self.policy.corruption or CorruptionConfig()
            return corrupting_predict(gold, cfg, self._corruption_rng, self._vocab)
        if kind == "remote":
            response = remote_predict(self.policy.endpoint, PredictorRequest(context=context))
            try:
                belief, _ = parse_belief(response.belief)
            except BeliefParseError:
                belief = BeliefState()
            return belief
        raise ValueError(f"unknown predictor: {kind!r}")

    # -- policy -------------------------------------------------------------

    def _request(self, session: Session, slot: Slot) -> str:
        session.asked.add(slot)
        session.questions += 1
        food = session.belief.slots.get(Slot.FOOD, "food")
        template = self.pack.request[slot][0]
        return render_template(template, {"food": denormalize_term(food)})

    def _inform(self, session: Session, outcome: nscorrect.CorrectionOutcome) -> str:
        record = self.kb.by_id(outcome.record_id)
        weight_text = session.belief.slots.get(
            Slot.FOODWEIGHT, format_weight(record.serving_weight)
        )
        metric = session.belief.slots.get(Slot.METRIC, record.serving_metric)
        session.status = "completed"
        return render_template(
            self.pack.inform[0],
            {
                "food": denormalize_term(record.slots[Relation.FOOD]),
                "salt": format_mg(outcome.belief.salt_value),
                "foodweight": weight_text,
                "metric": denormalize_term(metric),
            },
        )

    def handle_message(self, session_id: str, text: str) -> Reply:
        session = self._get(session_id)
        with session.lock:
            if session.status == "completed":
                raise SessionCompleted(session_id)
            if self._expired(session):
                raise SessionExpired(session_id)
            session.last_active = self.clock()
            session.context.append(("user", text))
            context = DialogueContext(turns=tuple(session.context))
            belief = self._predict(context)
            outcome = nscorrect.correct(belief, self.kb, self.units)
            session.belief = outcome.belief

            questions_left = session.questions < self.policy.max_questions
            if outcome.status is nscorrect.CorrectionStatus.AMBIGUOUS:
                candidates = lookup(
                    self.kb,
                    {Relation(s.value): v for s, v in session.belief.relation_slots().items()},
                )
                slot = _split_slot(candidates, session.belief)
                if slot is not None and questions_left:
                    reply = self._request(session, slot)
                else:
                    session.status = "completed"
                    reply = self.pack.unresolved[0]
            elif outcome.status is nscorrect.CorrectionStatus.NOT_FOUND:
                if Slot.FOOD not in session.belief.slots and questions_left:
                    reply = self._request(session, Slot.FOOD)
                else:
                    session.status = "completed"
                    reply = self.pack.not_found[0]
            else:
                record = self.kb.by_id(outcome.record_id)
                unfilled = [
                    slot
                    for slot in SLOT_ORDER
                    if slot not in session.belief.slots
                    and (
                        Relation(slot.value) in record.slots
                        if slot in RELATION_SLOTS
                        else slot is Slot.FOODWEIGHT
                    )
                ]
                if unfilled and questions_left:
                    reply = self._request(session, unfilled[0])
                else:
                    reply = self._inform(session, outcome)

            session.context.append(("system", reply))
            return Reply(
                reply=reply,
                belief=serialize_belief(session.belief),
                status=session.status,
            )

    def get_state(self, session_id: str) -> dict:
        session = self._get(session_id)
        with session.lock:
            status = session.status
            if status == "active" and self._expired(session):
                status = "expired"
            return {
                "belief": serialize_belief(session.belief),
                "asked": [slot.value for slot in SLOT_ORDER if slot in session.asked],
                "status": status,
                "transcript": [list(pair) for pair in session.context],
            }


class MessageIn(BaseModel):
    text: str


def create_app(service: DialogService) -> FastAPI:
    """HTTP layer: POST /session, POST /session/{id}/message, GET state, health."""
    app = FastAPI(title="salt-dialog service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(service.policy.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(SessionNotFound)
    async def _not_found(_, exc):
        return JSONResponse(status_code=404, content={"error": f"unknown session: {exc}"})

    @app.exception_handler(SessionCompleted)
    async def _completed(_, exc):
        return JSONResponse(status_code=409, content={"error": f"session completed: {exc}"})

    @app.exception_handler(SessionExpired)
    async def _expired(_, exc):
        return JSONResponse(status_code=410, content={"error": f"session expired: {exc}"})

    @app.exception_handler(PredictorUnavailable)
    async def _predictor_down(_, exc):
        return JSONResponse(status_code=503, content={"error": f"predictor unavailable: {exc}"})

    @app.post("/session")
    def create_session():
        return {"id": service.create_session().id}

    @app.post("/session/{session_id}/message")
    def message(session_id: str, body: MessageIn):
        reply = service.handle_message(session_id, body.text)
        return {"reply": reply.reply, "belief": reply.belief, "status": reply.status}

    @app.get("/session/{session_id}/state")
    def state(session_id: str):
        return service.get_state(session_id)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    return app
