"""Operator CLI: ingest a knowledge base, expand the ontology, generate a
corpus, evaluate predictors, and serve the live chat API.

Exit codes: 0 ok, 1 data error, 2 usage error.  Logs go to stderr; data goes
to stdout or the requested output file.  Flag defaults can be supplied by a
JSON config file (sections keyed by subcommand) named via --config or the
SALT_DIALOG_CONFIG environment variable; explicit flags win.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .convgen import GenConfig, export_corpus, generate_corpus, import_corpus
from .dst import CorruptionConfig
from .evalx import report_table
from .foodkb import (
    KnowledgeBase,
    Ontology,
    UnitTable,
    default_ontology,
    expand_ontology,
    fixture_records_path,
    ingest_records,
)
from .pipeline import evaluate_corpus
from .service import DialogService, PolicyConfig, create_app
from .templates import TemplatePack


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config file {path}: {exc}")


def _setting(ctx: click.Context, section: str, key: str, flag_value, default):
    """Flag value if given, else config-file value, else the built-in default."""
    if flag_value is not None:
        return flag_value
    return ctx.obj.get(section, {}).get(key, default)


def _load_kb(path: str | None, ontology: Ontology) -> KnowledgeBase:
    """Load a KB artifact (JSON) or ingest a raw CSV / JSON-lines source."""
    if path is None:
        return ingest_records(fixture_records_path(), ontology)
    source = Path(path)
    if source.suffix.lower() == ".json":
        return KnowledgeBase.from_json(source)
    kb = ingest_records(source, ontology)
    for rejection in kb.rejections:
        click.echo(f"warning: {rejection}", err=True)
    return kb


@click.group()
@click.option(
    "--config",
    envvar="SALT_DIALOG_CONFIG",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON config file with per-subcommand flag defaults.",
)
@click.pass_context
def main(ctx: click.Context, config: str | None):
    """Salt-content dialog toolkit."""
    ctx.obj = _load_config(config)


@main.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--ontology", "ontology_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def ingest(ctx: click.Context, source: str, ontology_path: str | None, out: str):
    """Build a KB artifact from a CSV or JSON-lines nutrient file."""
    ontology_path = _setting(ctx, "ingest", "ontology", ontology_path, None)
    ontology = Ontology.from_json(ontology_path) if ontology_path else default_ontology()
    kb = ingest_records(source, ontology)
    kb.to_json(out)
    click.echo(f"ingested {len(kb)} records -> {out}")
    if kb.rejections:
        for rejection in kb.rejections:
            click.echo(f"rejected {rejection}", err=True)
        sys.exit(1)


@main.group()
def ontology():
    """Ontology maintenance."""


@ontology.command("expand")
@click.option("--ontology", "ontology_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--neighbors", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--threshold", type=float, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def ontology_expand(
    ctx: click.Context,
    ontology_path: str | None,
    neighbors: str,
    threshold: float | None,
    out: str,
):
    """Grow the ontology from an embedding-neighbor CSV, for manual review."""
    threshold = _setting(ctx, "ontology", "threshold", threshold, 0.6)
    base = Ontology.from_json(ontology_path) if ontology_path else default_ontology()
    expanded, report = expand_ontology(base, neighbors, threshold=threshold)
    expanded.to_json(out)
    for neighbor, relation, seed, similarity in report.added:
        click.echo(f"added {neighbor} -> {relation.value} (from {seed}, sim {similarity})")
    click.echo(
        f"added {len(report.added)}; skipped: {report.skipped_unknown_seed} unknown seed, "
        f"{report.skipped_blocklisted} blocklisted, {report.skipped_below_threshold} below "
        f"threshold, {report.skipped_existing} existing"
    )
    if report.skipped_unknown_seed:
        click.echo(f"warning: {report.skipped_unknown_seed} rows had unknown seed terms", err=True)


@main.command()
@click.option("--kb", "kb_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("-n", "n_dialogues", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--random-rate", type=float, default=None)
@click.option("--changing-rate", type=float, default=None)
@click.option("--max-questions", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def generate(
    ctx: click.Context,
    kb_path: str | None,
    n_dialogues: int | None,
    seed: int | None,
    random_rate: float | None,
    changing_rate: float | None,
    max_questions: int | None,
    out: str,
):
    """Generate an annotated dialogue corpus."""
    config = GenConfig(
        seed=_setting(ctx, "generate", "seed", seed, 0),
        n_dialogues=_setting(ctx, "generate", "n", n_dialogues, 100),
        random_turn_rate=_setting(ctx, "generate", "random_rate", random_rate, 0.0045),
        changing_turn_rate=_setting(ctx, "generate", "changing_rate", changing_rate, 0.0045),
        max_questions=_setting(ctx, "generate", "max_questions", max_questions, 4),
    )
    kb = _load_kb(kb_path, default_ontology())
    corpus, stats = generate_corpus(kb, config)
    export_corpus(corpus, out)
    click.echo(f"# Dialogues            {stats.n_dialogues}")
    click.echo(f"# Total turns          {stats.total_turns}")
    click.echo(f"Avg turns per dialogue {stats.avg_turns:.2f}")
    click.echo(f"Avg slots              {stats.slot_count}")
    click.echo(f"Turn types             {stats.turn_type_counts}")


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--kb", "kb_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--predictor", type=click.Choice(["reference", "corrupting"]), default=None)
@click.option("--ns-correct/--no-ns-correct", "ns_correct", default=None)
@click.option("--salt-corrupt-prob", type=float, default=None)
@click.option("--slot-corrupt-prob", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--json-out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def evaluate(
    ctx: click.Context,
    corpus_path: str,
    kb_path: str | None,
    predictor: str | None,
    ns_correct: bool | None,
    salt_corrupt_prob: float | None,
    slot_corrupt_prob: float | None,
    seed: int | None,
    json_out: str | None,
):
    """Evaluate a predictor (with or without symbolic correction) on a corpus."""
    predictor = _setting(ctx, "evaluate", "predictor", predictor, "reference")
    ns_correct = _setting(ctx, "evaluate", "ns_correct", ns_correct, True)
    corruption = CorruptionConfig(
        salt_corrupt_prob=_setting(ctx, "evaluate", "salt_corrupt_prob", salt_corrupt_prob, 1.0),
        slot_corrupt_prob=_setting(ctx, "evaluate", "slot_corrupt_prob", slot_corrupt_prob, 0.1),
        seed=_setting(ctx, "evaluate", "seed", seed, 0),
    )
    try:
        corpus = import_corpus(corpus_path)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    kb = _load_kb(kb_path, default_ontology())
    report = evaluate_corpus(
        corpus, kb, predictor=predictor, ns_correct=ns_correct, corruption=corruption
    )
    click.echo(report_table(report))
    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if json_out:
        Path(json_out).write_text(payload + "\n", encoding="utf-8")
    else:
        click.echo(payload)


@main.command()
@click.option("--kb", "kb_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--predictor", type=click.Choice(["reference", "corrupting", "remote"]), default=None)
@click.option("--endpoint", default=None)
@click.option("--ttl", type=float, default=None)
@click.option("--max-questions", type=int, default=None)
@click.pass_context
def serve(
    ctx: click.Context,
    kb_path: str | None,
    host: str | None,
    port: int | None,
    predictor: str | None,
    endpoint: str | None,
    ttl: float | None,
    max_questions: int | None,
):
    """Run the HTTP chat service until interrupted."""
    import uvicorn

    host = _setting(ctx, "serve", "host", host, "127.0.0.1")
    port = _setting(ctx, "serve", "port", port, 8000)
    policy = PolicyConfig(
        max_questions=_setting(ctx, "serve", "max_questions", max_questions, 4),
        predictor=_setting(ctx, "serve", "predictor", predictor, "reference"),
        endpoint=_setting(ctx, "serve", "endpoint", endpoint, None),
        ttl_seconds=_setting(ctx, "serve", "ttl", ttl, 1800.0),
    )
    kb = _load_kb(kb_path, default_ontology())
    service = DialogService(kb, UnitTable.default(), TemplatePack.default(), policy)
    app = create_app(service)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except (OSError, ValueError, SystemExit) as exc:
        click.echo(f"error: cannot serve on {host}:{port}: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
