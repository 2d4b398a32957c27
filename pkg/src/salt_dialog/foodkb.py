"""Food knowledge base: description parsing, ontology classification, salt lookup.

Nutrient-database descriptions arrive as unstructured comma-separated text
("Pork, fresh, loin, top loin (chops), boneless, ..., raw").  This module
normalizes those descriptions into underscore-joined segments, classifies each
segment against a flat term->relation ontology, and serves salt lookups with
unit conversion and linear weight scaling.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping


class Relation(str, Enum):
    """Ontology relations a description segment can belong to."""

    FOOD = "food"
    COOK = "cook"
    TYPE = "type"
    ANIMAL = "animal"
    PART = "part"


class FoodKbError(Exception):
    """Base class for knowledge-base errors."""


class MalformedDescription(FoodKbError):
    """A raw description normalized to zero usable segments."""


class RowRejected(FoodKbError):
    """A source row violated a record invariant and was not ingested."""

    def __init__(self, row_number: int, reason: str):
        super().__init__(f"row {row_number}: {reason}")
        self.row_number = row_number
        self.reason = reason


class DuplicateRecord(RowRejected):
    """A source row repeats an already-ingested raw description."""


class MissingFoodSlot(FoodKbError):
    """A lookup was attempted without the mandatory food constraint."""


class UnitMismatch(FoodKbError):
    """Two units have no conversion path between them."""


_WHITESPACE = re.compile(r"\s+")


def normalize_term(text: str) -> str:
    """Normalize a description segment or slot value.

    Lowercase, strip "(" and ")" (their content is kept), and join inner
    whitespace runs with single underscores.  Already-normalized terms pass
    through unchanged, which makes the function idempotent.
    """
    cleaned = text.replace("(", " ").replace(")", " ").strip().lower()
    return _WHITESPACE.sub("_", cleaned).strip("_")


def denormalize_term(term: str) -> str:
    """Underscores back to spaces for surface text."""
    return term.replace("_", " ")


def parse_description(raw: str) -> list[str]:
    """Split a comma-separated description into normalized segments.

    Empty segments are dropped; a description with no usable segment raises
    MalformedDescription.
    """
    segments = [normalize_term(part) for part in raw.split(",")]
    segments = [s for s in segments if s]
    if not segments:
        raise MalformedDescription(f"no usable segments in {raw!r}")
    return segments


@dataclass(frozen=True)
class Ontology:
    """Flat mapping from normalized terms to relations, plus an expansion blocklist."""

    entries: dict[str, Relation]
    blocklist: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for term in list(self.entries) + list(self.blocklist):
            if term != normalize_term(term) or not term:
                raise ValueError(f"ontology term not normalized: {term!r}")
        overlap = set(self.entries) & set(self.blocklist)
        if overlap:
            raise ValueError(f"terms in both entries and blocklist: {sorted(overlap)}")

    @classmethod
    def from_json(cls, path: str | Path) -> "Ontology":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = {term: Relation(rel) for term, rel in data.get("entries", {}).items()}
        return cls(entries=entries, blocklist=frozenset(data.get("blocklist", [])))

    def to_json(self, path: str | Path) -> None:
        payload = {
            "entries": {t: r.value for t, r in sorted(self.entries.items())},
            "blocklist": sorted(self.blocklist),
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def classify_segments(segments: Iterable[str], ontology: Ontology) -> dict[Relation, str]:
    """Map description segments to relations.

    The first segment is the food, unconditionally.  Remaining segments are
    looked up in the ontology; unmapped segments default to the type relation
    and all type values are concatenated in order.  When several segments map
    to the same non-type relation the last mention wins ("cooked, broiled"
    ends up as cook=broiled).
    """
    segments = list(segments)
    if not segments:
        raise MalformedDescription("cannot classify an empty segment list")
    slots: dict[Relation, str] = {Relation.FOOD: segments[0]}
    type_parts: list[str] = []
    for segment in segments[1:]:
        relation = ontology.entries.get(segment, Relation.TYPE)
        if relation is Relation.TYPE:
            type_parts.append(segment)
        else:
            slots[relation] = segment
    if type_parts:
        slots[Relation.TYPE] = "_".join(type_parts)
    return slots


@dataclass(frozen=True)
class ExpansionReport:
    """What an ontology expansion added and what it skipped, for manual review."""

    added: tuple[tuple[str, Relation, str, float], ...]  # (neighbor, relation, seed, similarity)
    skipped_unknown_seed: int = 0
    skipped_blocklisted: int = 0
    skipped_below_threshold: int = 0
    skipped_existing: int = 0


def expand_ontology(
    ontology: Ontology,
    neighbor_file: str | Path,
    threshold: float = 0.6,
) -> tuple[Ontology, ExpansionReport]:
    """Grow the ontology from a precomputed embedding-neighbor list.

    The neighbor file is a CSV of (seed_term, neighbor_term, similarity) rows.
    A neighbor inherits its seed's relation when the similarity clears the
    threshold and the neighbor is neither blocklisted nor already mapped.
    Rows whose seed is unknown are skipped and counted as warnings.
    """
    entries = dict(ontology.entries)
    added: list[tuple[str, Relation, str, float]] = []
    unknown = blocked = below = existing = 0
    with open(neighbor_file, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            seed = normalize_term(row["seed_term"])
            neighbor = normalize_term(row["neighbor_term"])
            similarity = float(row["similarity"])
            if seed not in entries:
                unknown += 1
                continue
            if similarity < threshold:
                below += 1
                continue
            if neighbor in ontology.blocklist:
                blocked += 1
                continue
            if neighbor in entries:
                existing += 1
                continue
            entries[neighbor] = entries[seed]
            added.append((neighbor, entries[seed], seed, similarity))
    report = ExpansionReport(
        added=tuple(added),
        skipped_unknown_seed=unknown,
        skipped_blocklisted=blocked,
        skipped_below_threshold=below,
        skipped_existing=existing,
    )
    return Ontology(entries=entries, blocklist=ontology.blocklist), report


@dataclass(frozen=True)
class UnitTable:
    """Unit conversion factors, derived from per-unit gram equivalents.

    Units without a gram equivalent (packet, slice, ...) are count-style and
    convert only to themselves; a per-record gram equivalent can bridge them.
    Deriving every factor from gram equivalents keeps factor(a,b)*factor(b,a)
    at exactly 1 up to floating-point roundoff.
    """

    gram_equivalents: dict[str, float]
    aliases: dict[str, str] = field(default_factory=dict)

    @classmethod
    def default(cls) -> "UnitTable":
        return cls(
            gram_equivalents={
                "gram": 1.0,
                "ounce": 28.3495,
                "pound": 453.592,
                "kilogram": 1000.0,
            },
            aliases={
                "g": "gram",
                "grams": "gram",
                "gm": "gram",
                "gms": "gram",
                "oz": "ounce",
                "ounces": "ounce",
                "lb": "pound",
                "lbs": "pound",
                "pounds": "pound",
                "kg": "kilogram",
                "kilograms": "kilogram",
                "packets": "packet",
                "slices": "slice",
            },
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "UnitTable":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        table = cls.default()
        grams = dict(table.gram_equivalents)
        grams.update({k.strip().lower(): float(v) for k, v in data.get("gram_equivalents", {}).items()})
        aliases = dict(table.aliases)
        aliases.update({k.strip().lower(): v.strip().lower() for k, v in data.get("aliases", {}).items()})
        return cls(gram_equivalents=grams, aliases=aliases)

    def canonical(self, unit: str) -> str:
        unit = unit.strip().lower()
        return self.aliases.get(unit, unit)

    def is_weight_unit(self, unit: str) -> bool:
        return self.canonical(unit) in self.gram_equivalents

    def factor(self, from_unit: str, to_unit: str) -> float:
        """Multiplicative factor converting from_unit amounts into to_unit."""
        a, b = self.canonical(from_unit), self.canonical(to_unit)
        if a == b:
            return 1.0
        if a in self.gram_equivalents and b in self.gram_equivalents:
            return self.gram_equivalents[a] / self.gram_equivalents[b]
        raise UnitMismatch(f"no conversion from {from_unit!r} to {to_unit!r}")


@dataclass(frozen=True)
class FoodRecord:
    """One knowledge-base row: a parsed description plus its salt content."""

    id: int
    raw_description: str
    segments: tuple[str, ...]
    slots: dict[Relation, str]
    salt_mg: float
    serving_weight: float
    serving_metric: str
    gram_equivalent: float | None = None  # grams per 1 serving_metric, for count units


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable collection of food records; safe for concurrent reads."""

    records: tuple[FoodRecord, ...]
    rejections: tuple[RowRejected, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self, record_id: int) -> FoodRecord:
        for record in self.records:
            if record.id == record_id:
                return record
        raise KeyError(record_id)

    def vocabulary(self, relation: Relation) -> tuple[str, ...]:
        """Distinct values seen for a relation, sorted for determinism."""
        return tuple(sorted({r.slots[relation] for r in self.records if relation in r.slots}))

    def serving_metrics(self) -> tuple[str, ...]:
        return tuple(sorted({r.serving_metric for r in self.records}))

    def to_json(self, path: str | Path) -> None:
        payload = {
            "records": [
                {
                    "id": r.id,
                    "raw_description": r.raw_description,
                    "segments": list(r.segments),
                    "slots": {rel.value: v for rel, v in r.slots.items()},
                    "salt_mg": r.salt_mg,
                    "serving_weight": r.serving_weight,
                    "serving_metric": r.serving_metric,
                    "gram_equivalent": r.gram_equivalent,
                }
                for r in self.records
            ]
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path) -> "KnowledgeBase":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        records = tuple(
            FoodRecord(
                id=row["id"],
                raw_description=row["raw_description"],
                segments=tuple(row["segments"]),
                slots={Relation(rel): v for rel, v in row["slots"].items()},
                salt_mg=float(row["salt_mg"]),
                serving_weight=float(row["serving_weight"]),
                serving_metric=row["serving_metric"],
                gram_equivalent=row.get("gram_equivalent"),
            )
            for row in data["records"]
        )
        return cls(records=records)


def _iter_source_rows(path: Path):
    """Yield (row_number, dict) from a CSV or JSON-lines source file."""
    if path.suffix.lower() in {".jsonl", ".ndjson"}:
        with open(path, encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                line = line.strip()
                if line:
                    yield number, json.loads(line)
    else:
        with open(path, newline="", encoding="utf-8") as handle:
            for number, row in enumerate(csv.DictReader(handle), start=1):
                yield number, row


def ingest_records(path: str | Path, ontology: Ontology) -> KnowledgeBase:
    """Build a knowledge base from a CSV or JSON-lines file.

    Required columns: raw_description, salt_mg, serving_weight, serving_metric
    (gram_equivalent optional).  Rows violating record invariants, and rows
    duplicating an earlier description, are collected on the returned
    KnowledgeBase as rejections rather than aborting the ingest.  Accepted
    records get ids in file order starting at 1.
    """
    records: list[FoodRecord] = []
    rejections: list[RowRejected] = []
    seen: set[str] = set()
    for row_number, row in _iter_source_rows(Path(path)):
        try:
            raw = str(row["raw_description"])
            salt_mg = float(row["salt_mg"])
            serving_weight = float(row["serving_weight"])
            serving_metric = str(row["serving_metric"]).strip().lower()
            gram_equivalent = row.get("gram_equivalent")
            gram_equivalent = float(gram_equivalent) if gram_equivalent not in (None, "") else None
        except (KeyError, TypeError, ValueError) as exc:
            rejections.append(RowRejected(row_number, f"unreadable row: {exc}"))
            continue
        if raw in seen:
            rejections.append(DuplicateRecord(row_number, f"duplicate description: {raw!r}"))
            continue
        if salt_mg < 0:
            rejections.append(RowRejected(row_number, f"negative salt_mg: {salt_mg}"))
            continue
        if serving_weight <= 0:
            rejections.append(RowRejected(row_number, f"non-positive serving_weight: {serving_weight}"))
            continue
        if not serving_metric:
            rejections.append(RowRejected(row_number, "empty serving_metric"))
            continue
        try:
            segments = parse_description(raw)
        except MalformedDescription as exc:
            rejections.append(RowRejected(row_number, str(exc)))
            continue
        seen.add(raw)
        records.append(
            FoodRecord(
                id=len(records) + 1,
                raw_description=raw,
                segments=tuple(segments),
                slots=classify_segments(segments, ontology),
                salt_mg=salt_mg,
                serving_weight=serving_weight,
                serving_metric=serving_metric,
                gram_equivalent=gram_equivalent,
            )
        )
    return KnowledgeBase(records=tuple(records), rejections=tuple(rejections))


def lookup(kb: KnowledgeBase, constraints: Mapping[Relation, str]) -> list[FoodRecord]:
    """All records whose slots are a superset match of the constraints.

    Every constrained relation must be present on the record with an equal
    (normalized) value.  Results come back ordered by id.
    """
    if Relation.FOOD not in constraints:
        raise MissingFoodSlot("lookup requires at least the food slot")
    wanted = {rel: normalize_term(value) for rel, value in constraints.items()}
    matches = [
        record
        for record in kb.records
        if all(record.slots.get(rel) == value for rel, value in wanted.items())
    ]
    return sorted(matches, key=lambda r: r.id)


def salt_for(record: FoodRecord, weight: float, metric: str, units: UnitTable) -> float:
    """Salt in mg for a given amount of a record's food.

    The record's own standard serving is answered by returning the stored
    value with no arithmetic; anything else is scaled linearly after unit
    conversion.  Full precision is kept; rounding happens at presentation.
    """
    if weight <= 0:
        raise ValueError(f"weight must be positive, got {weight}")
    if units.canonical(metric) == units.canonical(record.serving_metric) and weight == record.serving_weight:
        return record.salt_mg
    try:
        factor = units.factor(metric, record.serving_metric)
    except UnitMismatch:
        # A per-record gram equivalent bridges count-style serving units.
        if record.gram_equivalent is not None and units.is_weight_unit(metric):
            grams = weight * units.factor(metric, "gram")
            return record.salt_mg * (grams / record.gram_equivalent) / record.serving_weight
        raise
    return record.salt_mg * (weight * factor) / record.serving_weight


def format_mg(value: float) -> str:
    """Presentation form of a salt amount: rounded to 2 decimals, no trailing zeros."""
    rounded = round(value, 2)
    if rounded == int(rounded):
        return str(int(rounded))
    return f"{rounded:.2f}".rstrip("0").rstrip(".")


def format_weight(value: float) -> str:
    """Presentation form of a weight (integral weights without a decimal point)."""
    if value == int(value):
        return str(int(value))
    return f"{value:g}"


def default_ontology() -> Ontology:
    """The ontology shipped with the package."""
    return Ontology.from_json(data_path("ontology.json"))


def fixture_records_path() -> Path:
    """Path of the packaged five-record pork fixture CSV."""
    return data_path("fixtures/pork_records.csv")


def data_path(name: str) -> Path:
    return Path(__file__).parent / "data" / name
