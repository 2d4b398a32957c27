import time

import pytest
from fastapi.testclient import TestClient

from salt_dialog.belief import Slot
from salt_dialog.dst import parse_belief
from salt_dialog.service import (
    DialogService,
    PolicyConfig,
    SessionCompleted,
    SessionExpired,
    SessionNotFound,
    create_app,
)

TOP_LOIN_SURFACE = "fresh loin top loin chops boneless separable lean and fat"


@pytest.fixture()
def service(kb, units, pack):
    return DialogService(kb, units, pack)


def test_sessions_get_distinct_ids(service):
    assert service.create_session().id != service.create_session().id


def test_new_session_belief_is_empty(service):
    session = service.create_session()
    assert service.get_state(session.id)["belief"] == "[]"


def test_unknown_session(service):
    with pytest.raises(SessionNotFound):
        service.get_state("nope")


def test_session_expires_after_ttl(kb, units, pack):
    now = [0.0]
    service = DialogService(
        kb, units, pack, PolicyConfig(ttl_seconds=10.0), clock=lambda: now[0]
    )
    session = service.create_session()
    service.handle_message(session.id, "How much salt in pork?")
    now[0] = 5.0
    service.handle_message(session.id, "It weighs 200 grams.")
    now[0] = 16.0  # 11s of inactivity
    with pytest.raises(SessionExpired):
        service.handle_message(session.id, "It is raw.")
    assert service.get_state(session.id)["status"] == "expired"


def test_scripted_conversation_with_volunteered_weight(service, kb, units):
    session = service.create_session()
    replies = [
        service.handle_message(session.id, "How much salt in pork?"),
        service.handle_message(session.id, "It weighs 200 grams."),
        service.handle_message(session.id, f"The type is {TOP_LOIN_SURFACE}."),
        service.handle_message(session.id, "It is raw."),
    ]
    # Four system turns, the last an inform with the scaled KB value.
    assert replies[-1].status == "completed"
    assert "96" in replies[-1].reply
    state = service.get_state(session.id)
    assert len(state["transcript"]) == 8
    # A filled slot is never requested again: the weight arrived out of turn
    # on turn 2 and no later system turn asks for it.
    asked_weight = [
        text for speaker, text in state["transcript"][3:] if speaker == "system" and "weigh" in text
    ]
    assert not asked_weight


def test_standard_serving_conversation_returns_exact_value(service):
    session = service.create_session()
    service.handle_message(session.id, "How much salt in pork?")
    service.handle_message(session.id, f"The type is {TOP_LOIN_SURFACE}.")
    reply = service.handle_message(session.id, "It is raw.")
    assert reply.status == "active"  # the weight is still open
    reply = service.handle_message(session.id, "It weighs 100 grams.")
    assert reply.status == "completed"
    assert "48 mg" in reply.reply


def test_ambiguous_food_triggers_clarification(service):
    session = service.create_session()
    reply = service.handle_message(session.id, "How much salt in pork?")
    # Five candidates; type splits them 5 ways, so the type question comes first.
    assert reply.status == "active"
    assert "type" in reply.reply.lower()


def test_completed_session_rejects_messages(service):
    session = service.create_session()
    reply = service.handle_message(session.id, "How much salt in pizza?")
    assert reply.status == "completed"
    with pytest.raises(SessionCompleted):
        service.handle_message(session.id, "hello again")


def test_unknown_food_completes_with_apology(service):
    session = service.create_session()
    reply = service.handle_message(session.id, "How much salt in pizza?")
    assert reply.status == "completed"
    assert "sorry" in reply.reply.lower()


def test_off_script_message_asks_for_food(service):
    session = service.create_session()
    reply = service.handle_message(session.id, "ramble ramble ramble")
    assert reply.status == "active"
    assert "food" in reply.reply.lower()


def test_question_budget_bounds_session(kb, units, pack):
    service = DialogService(kb, units, pack, PolicyConfig(max_questions=2))
    session = service.create_session()
    service.handle_message(session.id, "How much salt in pork?")
    service.handle_message(session.id, "hmm")
    reply = service.handle_message(session.id, "hmm again")
    assert reply.status == "completed"


def test_state_snapshot_matches_last_reply(service):
    session = service.create_session()
    reply = service.handle_message(session.id, "How much salt in pork?")
    state = service.get_state(session.id)
    assert state["belief"] == reply.belief
    belief, _ = parse_belief(state["belief"])
    assert belief.slots[Slot.FOOD] == "pork"
    assert state["asked"] == ["type"]


def test_reply_belief_carries_corrected_salt(service):
    session = service.create_session()
    service.handle_message(session.id, "How much salt in pork?")
    reply = service.handle_message(session.id, f"The type is {TOP_LOIN_SURFACE}.")
    belief, _ = parse_belief(reply.belief)
    # food + type resolve uniquely; the corrector filled the standard value.
    assert belief.salt_value == 48.0


def test_concurrent_sessions_are_independent(service):
    import threading

    results = {}

    def run(tag):
        session = service.create_session()
        service.handle_message(session.id, "How much salt in pork?")
        service.handle_message(session.id, "It weighs 200 grams.")
        service.handle_message(session.id, f"The type is {TOP_LOIN_SURFACE}.")
        reply = service.handle_message(session.id, "It is raw.")
        results[tag] = reply

    threads = [threading.Thread(target=run, args=(i,)) for i in range(8)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert len(results) == 8
    assert all("96" in reply.reply for reply in results.values())


def test_handle_message_latency(service):
    session = service.create_session()
    start = time.perf_counter()
    service.handle_message(session.id, "How much salt in pork?")
    elapsed = time.perf_counter() - start
    assert elapsed < 0.05


# -- HTTP layer ----------------------------------------------------------------------


@pytest.fixture()
def client(service):
    return TestClient(create_app(service))


def test_http_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_http_full_conversation(client):
    session_id = client.post("/session").json()["id"]
    turns = [
        "How much salt in pork?",
        "It weighs 200 grams.",
        f"The type is {TOP_LOIN_SURFACE}.",
        "It is raw.",
    ]
    body = None
    for text in turns:
        response = client.post(f"/session/{session_id}/message", json={"text": text})
        assert response.status_code == 200
        body = response.json()
        state = client.get(f"/session/{session_id}/state").json()
        assert state["belief"] == body["belief"]
    assert body["status"] == "completed"
    assert "96" in body["reply"]


def test_http_unknown_session_404(client):
    assert client.get("/session/zzz/state").status_code == 404
    response = client.post("/session/zzz/message", json={"text": "hi"})
    assert response.status_code == 404


def test_http_completed_session_409(client):
    session_id = client.post("/session").json()["id"]
    client.post(f"/session/{session_id}/message", json={"text": "How much salt in pizza?"})
    response = client.post(f"/session/{session_id}/message", json={"text": "hi"})
    assert response.status_code == 409


def test_http_cors_headers(client):
    response = client.get("/health", headers={"Origin": "http://localhost:5173"})
    assert response.headers.get("access-control-allow-origin") in ("*", "http://localhost:5173")
