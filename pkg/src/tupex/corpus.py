"""Annotated-corpus data model and strict JSON (de)serialization.

A dataset is a list of sentences, each carrying gold tuples of typed
character-offset spans.  Offsets are half-open [start, end) and counted in
Unicode code points.  Parsing rejects malformed input rather than repairing
it; serialization is canonical (sorted keys, compact separators, UTF-8,
no BOM, no trailing newline) so that parse and serialize are inverses.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping


class CorpusError(ValueError):
    """A dataset violated the documented schema or an operation's precondition."""


class EntityType(Enum):
    MATERIAL = "material"
    PROPERTY = "property"
    PROPERTY_VALUE = "property_value"
    CONDITION = "condition"
    CONDITION_VALUE = "condition_value"


# Slot order used everywhere a stable iteration order is needed.
TYPE_ORDER: tuple[EntityType, ...] = (
    EntityType.MATERIAL,
    EntityType.PROPERTY,
    EntityType.PROPERTY_VALUE,
    EntityType.CONDITION,
    EntityType.CONDITION_VALUE,
)
MANDATORY_TYPES: tuple[EntityType, ...] = TYPE_ORDER[:3]
OPTIONAL_TYPES: tuple[EntityType, ...] = TYPE_ORDER[3:]

K_BUCKETS = (1, 2, 3, 4)
EXCLUDED_KEY = "excluded"


@dataclass(frozen=True)
class EntitySpan:
    """A typed character span. `text` is the exact sentence slice."""

    entity_type: EntityType
    start: int
    end: int
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.start, int) or not isinstance(self.end, int):
            raise CorpusError("span offsets must be integers")
        if self.start < 0 or self.end <= self.start:
            raise CorpusError(
                f"invalid span offsets [{self.start}, {self.end})"
            )

    @property
    def offsets(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class TupleRecord:
    """One extracted fact. Condition and condition value are the only
    omissible slots, and a condition value requires a condition."""

    material: EntitySpan
    property: EntitySpan
    property_value: EntitySpan
    condition: EntitySpan | None = None
    condition_value: EntitySpan | None = None

    def __post_init__(self) -> None:
        expected = {
            "material": (self.material, EntityType.MATERIAL),
            "property": (self.property, EntityType.PROPERTY),
            "property_value": (self.property_value, EntityType.PROPERTY_VALUE),
            "condition": (self.condition, EntityType.CONDITION),
            "condition_value": (self.condition_value, EntityType.CONDITION_VALUE),
        }
        for slot, (span, etype) in expected.items():
            if span is not None and span.entity_type is not etype:
                raise CorpusError(f"slot {slot} holds a {span.entity_type.value} span")
        if self.condition_value is not None and self.condition is None:
            raise CorpusError("condition_value present without condition")

    def slots(self) -> Iterator[tuple[EntityType, EntitySpan | None]]:
        yield EntityType.MATERIAL, self.material
        yield EntityType.PROPERTY, self.property
        yield EntityType.PROPERTY_VALUE, self.property_value
        yield EntityType.CONDITION, self.condition
        yield EntityType.CONDITION_VALUE, self.condition_value


@dataclass(frozen=True)
class AnnotatedSentence:
    id: str
    text: str
    tuples: tuple[TupleRecord, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise CorpusError("sentence id must be a non-empty string")
        if not isinstance(self.text, str):
            raise CorpusError(f"sentence {self.id}: text must be a string")
        object.__setattr__(self, "tuples", tuple(self.tuples))
        n = len(self.text)
        for t in self.tuples:
            for _, span in t.slots():
                if span is None:
                    continue
                if span.end > n:
                    raise CorpusError(
                        f"sentence {self.id}: span [{span.start}, {span.end}) "
                        f"exceeds text length {n}"
                    )
                if self.text[span.start : span.end] != span.text:
                    raise CorpusError(
                        f"sentence {self.id}: span text {span.text!r} does not "
                        f"match slice {self.text[span.start:span.end]!r}"
                    )


@dataclass(frozen=True)
class Dataset:
    sentences: tuple[AnnotatedSentence, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))
        seen: set[str] = set()
        for s in self.sentences:
            if s.id in seen:
                raise CorpusError(f"duplicate sentence id {s.id}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.sentences)

    def sentence_map(self) -> dict[str, AnnotatedSentence]:
        return {s.id: s for s in self.sentences}


@dataclass(frozen=True)
class KSlice:
    k: int
    sentences: int
    tuples: int
    proportion: float


@dataclass(frozen=True)
class CorpusStats:
    total_sentences: int
    total_tuples: int
    per_k: tuple[KSlice, ...]

    def to_dict(self) -> dict:
        return {
            "total_sentences": self.total_sentences,
            "total_tuples": self.total_tuples,
            "per_k": [
                {
                    "k": s.k,
                    "sentences": s.sentences,
                    "tuples": s.tuples,
                    "proportion": s.proportion,
                }
                for s in self.per_k
            ],
        }


# ---------------------------------------------------------------------------
# JSON parsing

_SPAN_KEYS = {"start", "end", "text"}
_TUPLE_KEYS = {"material", "property", "property_value", "condition", "condition_value"}
# Documented extensions written by the CLI and ignored here: prediction files
# carry per-tuple scores and per-sentence raw entity sections, artifacts carry
# a top-level effective-config echo.
_TUPLE_EXTRAS = {"score"}
_SENTENCE_KEYS = {"id", "text", "tuples"}
_SENTENCE_EXTRAS = {"entities"}
_TOP_EXTRAS = {"meta"}


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise CorpusError(msg)


def _is_int(x: object) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _parse_span(obj: object, etype: EntityType, where: str) -> EntitySpan:
    _require(isinstance(obj, dict), f"{where}: span must be an object")
    assert isinstance(obj, dict)
    unknown = set(obj) - _SPAN_KEYS
    _require(not unknown, f"{where}: unexpected span keys {sorted(unknown)}")
    _require(set(obj) == _SPAN_KEYS, f"{where}: span requires start, end, text")
    _require(_is_int(obj["start"]) and _is_int(obj["end"]), f"{where}: span offsets must be integers")
    _require(isinstance(obj["text"], str), f"{where}: span text must be a string")
    try:
        return EntitySpan(etype, obj["start"], obj["end"], obj["text"])
    except CorpusError as e:
        raise CorpusError(f"{where}: {e}") from None


def _parse_tuple(obj: object, where: str) -> TupleRecord:
    _require(isinstance(obj, dict), f"{where}: tuple must be an object")
    assert isinstance(obj, dict)
    unknown = set(obj) - _TUPLE_KEYS - _TUPLE_EXTRAS
    _require(not unknown, f"{where}: unexpected tuple keys {sorted(unknown)}")
    for slot in ("material", "property", "property_value"):
        _require(obj.get(slot) is not None, f"{where}: missing mandatory slot {slot}")
    spans: dict[str, EntitySpan | None] = {}
    for slot, etype in (
        ("material", EntityType.MATERIAL),
        ("property", EntityType.PROPERTY),
        ("property_value", EntityType.PROPERTY_VALUE),
        ("condition", EntityType.CONDITION),
        ("condition_value", EntityType.CONDITION_VALUE),
    ):
        raw = obj.get(slot)
        spans[slot] = None if raw is None else _parse_span(raw, etype, f"{where}.{slot}")
    try:
        return TupleRecord(**spans)  # type: ignore[arg-type]
    except CorpusError as e:
        raise CorpusError(f"{where}: {e}") from None


def parse_dataset(raw: bytes | str) -> Dataset:
    """Parse and fully validate a corpus JSON document."""
    if isinstance(raw, bytes):
        _require(not raw.startswith(b"\xef\xbb\xbf"), "corpus files must not carry a BOM")
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorpusError(f"corpus is not valid UTF-8: {e}") from None
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise CorpusError(f"malformed JSON: {e}") from None
    _require(isinstance(doc, dict), "top level must be an object")
    unknown = set(doc) - {"sentences"} - _TOP_EXTRAS
    _require(not unknown, f"unexpected top-level keys {sorted(unknown)}")
    _require("sentences" in doc, 'top level must carry "sentences"')
    _require(isinstance(doc["sentences"], list), '"sentences" must be a list')

    sentences = []
    for i, s in enumerate(doc["sentences"]):
        _require(isinstance(s, dict), f"sentences[{i}] must be an object")
        unknown = set(s) - _SENTENCE_KEYS - _SENTENCE_EXTRAS
        _require(not unknown, f"sentences[{i}]: unexpected keys {sorted(unknown)}")
        for key in _SENTENCE_KEYS:
            _require(key in s, f"sentences[{i}]: missing {key}")
        sid = s["id"]
        _require(isinstance(sid, str) and sid, f"sentences[{i}]: id must be a non-empty string")
        _require(isinstance(s["text"], str), f"sentence {sid}: text must be a string")
        _require(isinstance(s["tuples"], list), f"sentence {sid}: tuples must be a list")
        tuples = tuple(
            _parse_tuple(t, f"sentence {sid} tuple {j}") for j, t in enumerate(s["tuples"])
        )
        sentences.append(AnnotatedSentence(sid, s["text"], tuples))
    return Dataset(tuple(sentences))


# ---------------------------------------------------------------------------
# Canonical serialization

def _span_dict(span: EntitySpan) -> dict:
    return {"start": span.start, "end": span.end, "text": span.text}


def _tuple_dict(t: TupleRecord) -> dict:
    return {
        "material": _span_dict(t.material),
        "property": _span_dict(t.property),
        "property_value": _span_dict(t.property_value),
        "condition": None if t.condition is None else _span_dict(t.condition),
        "condition_value": None if t.condition_value is None else _span_dict(t.condition_value),
    }


def dataset_to_dict(dataset: Dataset, meta: dict | None = None) -> dict:
    doc: dict = {
        "sentences": [
            {"id": s.id, "text": s.text, "tuples": [_tuple_dict(t) for t in s.tuples]}
            for s in dataset.sentences
        ]
    }
    if meta is not None:
        doc["meta"] = meta
    return doc


def canonical_json_bytes(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def serialize_dataset(dataset: Dataset, meta: dict | None = None) -> bytes:
    return canonical_json_bytes(dataset_to_dict(dataset, meta))


# ---------------------------------------------------------------------------
# Bookkeeping operations

def split_by_tuple_count(dataset: Dataset) -> dict[int | str, Dataset]:
    """Bucket sentences by tuple count: 1..4, plus 'excluded' for 5 or more.

    Sentences with zero tuples are an error here; only inference inputs may
    be unlabeled.
    """
    buckets: dict[int | str, list[AnnotatedSentence]] = {k: [] for k in K_BUCKETS}
    buckets[EXCLUDED_KEY] = []
    for s in dataset.sentences:
        k = len(s.tuples)
        if k == 0:
            raise CorpusError(f"sentence {s.id} has no tuples")
        key: int | str = k if k in buckets else EXCLUDED_KEY
        buckets[key].append(s)
    return {key: Dataset(tuple(v)) for key, v in buckets.items()}


def stats(dataset: Dataset) -> CorpusStats:
    """Tuple-count distribution: per-k sentence/tuple counts and proportions."""
    per_k: dict[int, list[int]] = {}
    for s in dataset.sentences:
        k = len(s.tuples)
        cell = per_k.setdefault(k, [0, 0])
        cell[0] += 1
        cell[1] += k
    total = len(dataset.sentences)
    slices = tuple(
        KSlice(k, c[0], c[1], c[0] / total if total else 0.0)
        for k, c in sorted(per_k.items())
    )
    return CorpusStats(total, sum(len(s.tuples) for s in dataset.sentences), slices)


def train_val_split(dataset: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic 9:1 split: seeded uniform shuffle, then a prefix cut.

    The validation size is round(n/10) with ties rounded up.
    """
    n = len(dataset.sentences)
    if n < 10:
        raise CorpusError(f"need at least 10 sentences to split, got {n}")
    n_val = (n + 5) // 10
    order = list(dataset.sentences)
    random.Random(seed).shuffle(order)
    return Dataset(tuple(order[n_val:])), Dataset(tuple(order[:n_val]))
