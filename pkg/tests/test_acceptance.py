"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with:  pytest tests/test_acceptance.py -v -s
"""
import math
import random
import time
from contextlib import contextmanager

import pytest
from fastapi.testclient import TestClient

from salt_dialog import nscorrect
from salt_dialog.convgen import GenConfig, export_corpus, generate_corpus
from salt_dialog.dst import CorruptionConfig, reference_track
from salt_dialog.evalx import corpus_bleu, joint_accuracy, readability, salt_close
from salt_dialog.foodkb import (
    Relation,
    denormalize_term,
    default_ontology,
    fixture_records_path,
    format_mg,
    format_weight,
    ingest_records,
    salt_for,
)
from salt_dialog.pipeline import (
    corrupted_beliefs,
    evaluate_beliefs,
    gold_turn_beliefs,
    reference_beliefs,
    user_contexts,
)
from salt_dialog.service import DialogService, create_app
from salt_dialog.templates import render_template

pytestmark = pytest.mark.filterwarnings("ignore::DeprecationWarning")

CORPUS_SEED = 7
CORRUPTION_SEED = 4  # a typical draw of the 0.9^2 ~= 81% no-slot-corruption regime


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


@pytest.fixture(scope="module")
def corpus_1000(kb):
    return generate_corpus(kb, GenConfig(seed=CORPUS_SEED, n_dialogues=1000))


def test_fixture_retrieval(units):
    with criterion("fixture retrieval: pork KB returns 48/55/58/63/76 mg at 100 g"):
        start = time.perf_counter()
        kb = ingest_records(fixture_records_path(), default_ontology())
        values = [salt_for(record, 100.0, "grams", units) for record in kb]
        elapsed = time.perf_counter() - start
        assert values == [48.0, 55.0, 58.0, 63.0, 76.0]
        assert all(value == record.salt_mg for value, record in zip(values, kb))
        assert elapsed < 1.0


def test_scaling_oracle(kb, units):
    with criterion("scaling oracle: 1000 seeded triples match the one-line oracle at 1e-9"):
        start = time.perf_counter()
        grams = {"grams": 1.0, "ounces": 28.3495, "pounds": 453.592}
        rng = random.Random(20240501)
        for _ in range(1000):
            record = rng.choice(list(kb.records))
            weight = rng.uniform(1.0, 1000.0)
            metric = rng.choice(list(grams))
            oracle = record.salt_mg * (weight * grams[metric]) / record.serving_weight
            got = salt_for(record, weight, metric, units)
            assert math.isclose(got, oracle, rel_tol=1e-9)
        assert time.perf_counter() - start < 1.0


def test_corpus_statistics(kb, tmp_path):
    with criterion("corpus statistics: n=1000 seed=7, mean turns in [5,7], 7 slots, deterministic"):
        start = time.perf_counter()
        config = GenConfig(seed=CORPUS_SEED, n_dialogues=1000)
        corpus_a, stats = generate_corpus(kb, config)
        corpus_b, _ = generate_corpus(kb, config)
        elapsed = time.perf_counter() - start
        assert 5.0 <= stats.avg_turns <= 7.0
        assert stats.slot_count == 7
        path_a, path_b = tmp_path / "a.json", tmp_path / "b.json"
        export_corpus(corpus_a, path_a)
        export_corpus(corpus_b, path_b)
        assert path_a.read_bytes() == path_b.read_bytes()
        assert elapsed < 10.0


def test_ns_correction_lift(kb, units, corpus_1000):
    with criterion("NS-correction lift: success <=5% before, >=80% after, equal to slot-intact rate"):
        corpus, _ = corpus_1000
        cfg = CorruptionConfig(salt_corrupt_prob=1.0, slot_corrupt_prob=0.1, seed=CORRUPTION_SEED)
        predictions = corrupted_beliefs(corpus, kb, cfg)
        pre = evaluate_beliefs(corpus, predictions, kb, ns_correct=False)
        post = evaluate_beliefs(corpus, predictions, kb, ns_correct=True)
        assert pre.report.success <= 5.0
        assert post.report.success >= 80.0
        # Independent target: dialogues whose final slots survived corruption
        # and whose gold belief resolves to a unique record.
        intact_and_resolving = sum(
            1
            for dialogue, turn_predictions in zip(corpus, predictions)
            if turn_predictions[-1].slots == dialogue.final_user_belief().slots
            and nscorrect.correct(dialogue.final_user_belief(), kb, units).resolved
        )
        target = 100.0 * intact_and_resolving / len(corpus)
        assert abs(post.report.success - target) <= 2.0


def _joint_accuracies(corpus, kb, units, cfg):
    predictions = corrupted_beliefs(corpus, kb, cfg)
    flat_gold = [belief for dialogue in corpus for belief in gold_turn_beliefs(dialogue)]
    flat_pre = [belief for turns in predictions for belief in turns]
    flat_post = [
        nscorrect.correct(belief, kb, units).belief for turns in predictions for belief in turns
    ]
    return joint_accuracy(flat_pre, flat_gold), joint_accuracy(flat_post, flat_gold)


def test_joint_accuracy_lift(kb, units, corpus_1000):
    with criterion("joint-accuracy lift: +20 points after correction, monotone over 20 seeds"):
        corpus, _ = corpus_1000
        cfg = CorruptionConfig(salt_corrupt_prob=1.0, slot_corrupt_prob=0.1, seed=CORRUPTION_SEED)
        pre, post = _joint_accuracies(corpus, kb, units, cfg)
        assert post - pre >= 20.0
        subset = corpus[:300]
        for seed in range(20):
            seeded = CorruptionConfig(salt_corrupt_prob=1.0, slot_corrupt_prob=0.1, seed=seed)
            pre_seed, post_seed = _joint_accuracies(subset, kb, units, seeded)
            assert post_seed >= pre_seed


def test_reference_tracker_self_consistency(kb, units, pack, corpus_1000):
    with criterion("reference tracker: slot-only joint accuracy 100% on a generated corpus"):
        corpus, _ = corpus_1000
        sample = corpus[:250]
        predictions = reference_beliefs(sample, kb, pack, units)
        turns = 0
        exact = 0
        for dialogue, turn_predictions in zip(sample, predictions):
            for predicted, gold in zip(turn_predictions, gold_turn_beliefs(dialogue)):
                turns += 1
                exact += predicted.slots == gold.slots
        assert turns > 0 and exact == turns


def test_bleu_sanity():
    with criterion("BLEU sanity: identity 1.0, disjoint <=1e-6, hand-computed 3-pair case"):
        corpus = ["pork has 48 mg of salt per 100 grams.", "How is the pork cooked?"]
        assert corpus_bleu(corpus, corpus) == pytest.approx(1.0, abs=1e-12)
        assert corpus_bleu(["aaa bbb ccc ddd"], ["www xxx yyy zzz"]) <= 1e-6
        candidates = ["the cat sat", "a dog barks loudly", "salt is bad"]
        references = ["the cat sat down", "a dog barks loudly", "salt is bad for you"]
        # every clipped precision is 1; BP = exp(1 - 13/10)
        assert corpus_bleu(candidates, references) == pytest.approx(math.exp(1 - 13 / 10), abs=1e-6)


def test_readability_of_system_templates(kb, pack):
    with criterion("readability: instantiated system templates score FKGL <= 5.0 and FKRE >= 80"):
        sentences = []
        for record in kb:
            food = denormalize_term(record.slots[Relation.FOOD])
            for variants in pack.request.values():
                for template in variants:
                    sentences.append(render_template(template, {"food": food}))
            sentences.append(
                render_template(
                    pack.inform[0],
                    {
                        "food": food,
                        "salt": format_mg(record.salt_mg),
                        "foodweight": format_weight(record.serving_weight),
                        "metric": record.serving_metric,
                    },
                )
            )
        sentences.extend(pack.not_found)
        sentences.extend(pack.unresolved)
        scores = readability(" ".join(sentences))
        assert scores["fkgl"] <= 5.0
        assert scores["fkre"] >= 80.0
        # formula spot-check stays exact
        hand = readability("It is salt.")
        assert hand["fkre"] == pytest.approx(119.19, abs=1e-9)
        assert hand["fkgl"] == pytest.approx(-2.62, abs=1e-9)
        assert hand["smog"] == pytest.approx(3.1291, abs=1e-9)


def test_live_service_scripted_conversation(kb, units, pack):
    with criterion("live service: scripted conversation informs the KB value in <=4 system turns"):
        service = DialogService(kb, units, pack)
        client = TestClient(create_app(service))
        session_id = client.post("/session").json()["id"]
        script = [
            "How much salt in pork?",  # initial question
            "It weighs 200 grams.",  # volunteered weight, out of turn
            "The type is fresh loin top loin chops boneless separable lean and fat.",
            "It is raw.",
        ]
        replies = []
        for text in script:
            response = client.post(f"/session/{session_id}/message", json={"text": text})
            assert response.status_code == 200
            replies.append(response.json())
        assert len(replies) == 4  # four system turns, no more
        assert replies[-1]["status"] == "completed"
        expected = salt_for(kb.by_id(1), 200.0, "grams", units)
        delivered = float(replies[-1]["reply"].split(" has ")[1].split(" mg")[0])
        assert salt_close(delivered, expected) and delivered == 96.0
        # the volunteered weight is never re-asked once filled
        transcript = client.get(f"/session/{session_id}/state").json()["transcript"]
        system_after_weight = [text for speaker, text in transcript[3:] if speaker == "system"]
        assert all("weigh" not in text for text in system_after_weight)
