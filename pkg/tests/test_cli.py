import json

import pytest
from click.testing import CliRunner

from salt_dialog.cli import main
from salt_dialog.foodkb import KnowledgeBase, fixture_records_path, data_path


@pytest.fixture()
def runner():
    return CliRunner()


def test_help_exits_zero(runner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for subcommand in ("ingest", "ontology", "generate", "evaluate", "serve"):
        assert subcommand in result.output


def test_unknown_flag_exits_two(runner):
    result = runner.invoke(main, ["generate", "--definitely-not-a-flag"])
    assert result.exit_code == 2


def test_ingest_fixture(runner, tmp_path):
    out = tmp_path / "kb.json"
    result = runner.invoke(main, ["ingest", str(fixture_records_path()), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert len(KnowledgeBase.from_json(out)) == 5


def test_ingest_empty_file(runner, tmp_path):
    source = tmp_path / "empty.csv"
    source.write_text("raw_description,salt_mg,serving_weight,serving_metric\n")
    out = tmp_path / "kb.json"
    result = runner.invoke(main, ["ingest", str(source), "--out", str(out)])
    assert result.exit_code == 0
    assert len(KnowledgeBase.from_json(out)) == 0


def test_ingest_bad_row_exits_one(runner, tmp_path):
    source = tmp_path / "bad.csv"
    source.write_text(
        "raw_description,salt_mg,serving_weight,serving_metric\n"
        '"Beef, raw",-3,100,grams\n'
    )
    out = tmp_path / "kb.json"
    result = runner.invoke(main, ["ingest", str(source), "--out", str(out)])
    assert result.exit_code == 1
    assert "rejected" in result.output


def test_ontology_expand(runner, tmp_path):
    out = tmp_path / "expanded.json"
    result = runner.invoke(
        main,
        [
            "ontology",
            "expand",
            "--neighbors",
            str(data_path("neighbors_sample.csv")),
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    expanded = json.loads(out.read_text())
    assert expanded["entries"]["simmered"] == "cook"
    assert "kettle" not in expanded["entries"]


def test_generate_deterministic_and_stats(runner, tmp_path):
    args = ["generate", "-n", "100", "--seed", "7"]
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    result_a = runner.invoke(main, args + ["--out", str(first)])
    result_b = runner.invoke(main, args + ["--out", str(second)])
    assert result_a.exit_code == 0, result_a.output
    assert result_b.exit_code == 0
    assert first.read_bytes() == second.read_bytes()
    assert "Avg slots              7" in result_a.output


def test_generate_rejects_zero_dialogues(runner, tmp_path):
    result = runner.invoke(main, ["generate", "-n", "0", "--out", str(tmp_path / "c.json")])
    assert result.exit_code == 2


def test_evaluate_reference_predictor(runner, tmp_path):
    corpus = tmp_path / "corpus.json"
    assert runner.invoke(main, ["generate", "-n", "50", "--seed", "3", "--out", str(corpus)]).exit_code == 0
    report_path = tmp_path / "report.json"
    result = runner.invoke(
        main,
        ["evaluate", "--corpus", str(corpus), "--json-out", str(report_path)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(report_path.read_text())
    assert report["joint_accuracy"] == 100.0
    assert report["inform"] == 100.0
    assert report["success"] == 100.0


def test_evaluate_corruption_lift(runner, tmp_path):
    corpus = tmp_path / "corpus.json"
    assert runner.invoke(main, ["generate", "-n", "200", "--seed", "3", "--out", str(corpus)]).exit_code == 0
    base = ["evaluate", "--corpus", str(corpus), "--predictor", "corrupting", "--seed", "4"]
    plain = runner.invoke(main, base + ["--no-ns-correct", "--json-out", str(tmp_path / "pre.json")])
    fixed = runner.invoke(main, base + ["--ns-correct", "--json-out", str(tmp_path / "post.json")])
    assert plain.exit_code == 0 and fixed.exit_code == 0
    pre = json.loads((tmp_path / "pre.json").read_text())
    post = json.loads((tmp_path / "post.json").read_text())
    assert pre["success"] < 5.0
    assert post["success"] - pre["success"] >= 60.0


def test_config_file_supplies_defaults(runner, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"generate": {"n": 5, "seed": 11}}))
    out = tmp_path / "corpus.json"
    result = runner.invoke(main, ["--config", str(config), "generate", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "# Dialogues            5" in result.output
    # explicit flag wins over the config file
    result = runner.invoke(
        main, ["--config", str(config), "generate", "-n", "3", "--out", str(out)]
    )
    assert "# Dialogues            3" in result.output


def test_serve_bad_port_exits_one(runner):
    result = runner.invoke(main, ["serve", "--port", "70000"])
    assert result.exit_code == 1
