"""Deterministic synthetic corpus generator.

Three sentence patterns cover the shapes the extractor has to handle:
one material with several properties (A), one material/property pair
measured under several conditions (B), and one property compared across
several materials (C).  Sentences are built by appending literals and
spans to a cursor, so gold offsets are computed during substitution and
never re-searched.

The vocabulary is engineered so every token surface form has one
consistent role corpus-wide (condition-value numbers never collide with
property-value numbers, units only ever end a value span, the word
"temperature" is always a condition).  Frozen per-token embeddings carry
no context, so a surface form with two roles would be unlearnable.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .corpus import AnnotatedSentence, CorpusError, Dataset, EntitySpan, EntityType, TupleRecord

# Element symbols, optionally followed by integer subscripts.
ALLOY_NAME_RE = re.compile(r"^(?:[A-Z][a-z]?\d*)+$")

_ELEMENTS = (
    "Al", "Co", "Cr", "Cu", "Fe", "Hf", "Mn", "Mo",
    "Nb", "Ni", "Ta", "Ti", "V", "W", "Zr",
)


class Pattern(Enum):
    ONE_MATERIAL_MANY_PROPERTIES = "A"
    SHARED_PAIR_MANY_CONDITIONS = "B"
    ONE_PROPERTY_MANY_MATERIALS = "C"
    SHARED_CONTEXT_MANY_VALUES = "D"


@dataclass(frozen=True)
class PropertySpec:
    name: str
    unit: str
    values: tuple[str, ...]  # formatted with unit, e.g. "879 MPa" / "14.9%"


@dataclass(frozen=True)
class Vocabulary:
    alloys: tuple[str, ...]
    properties: tuple[PropertySpec, ...]
    condition_values: tuple[str, ...]


@dataclass(frozen=True)
class SynthConfig:
    n_sentences: int
    k_distribution: Mapping[int, float]
    pattern_mix: Mapping[Pattern, float]
    condition_omission_rate: float
    vocab_seed: int
    id_prefix: str = "synth"  # keeps ids distinct when corpora are merged

    def __post_init__(self) -> None:
        if self.n_sentences < 0:
            raise CorpusError("n_sentences must be non-negative")
        object.__setattr__(
            self, "k_distribution", {int(k): float(v) for k, v in self.k_distribution.items()}
        )
        try:
            mix = {Pattern(k): float(v) for k, v in self.pattern_mix.items()}
        except ValueError as e:
            raise CorpusError(f"bad pattern_mix key: {e}") from None
        object.__setattr__(self, "pattern_mix", mix)
        if not set(self.k_distribution) <= {1, 2, 3, 4}:
            raise CorpusError("k_distribution keys must be in 1..4")
        for name, dist in (("k_distribution", self.k_distribution), ("pattern_mix", self.pattern_mix)):
            if not dist:
                raise CorpusError(f"{name} must not be empty")
            if any(p < 0 for p in dist.values()):
                raise CorpusError(f"{name} probabilities must be non-negative")
            if abs(sum(dist.values()) - 1.0) > 1e-9:
                raise CorpusError(f"{name} probabilities must sum to 1")
        if not 0.0 <= self.condition_omission_rate <= 1.0:
            raise CorpusError("condition_omission_rate must be in [0, 1]")

    @staticmethod
    def from_dict(doc: Mapping) -> "SynthConfig":
        try:
            return SynthConfig(
                n_sentences=doc["n_sentences"],
                k_distribution={int(k): float(v) for k, v in doc["k_distribution"].items()},
                pattern_mix={Pattern(k): float(v) for k, v in doc["pattern_mix"].items()},
                condition_omission_rate=float(doc.get("condition_omission_rate", 0.0)),
                vocab_seed=int(doc.get("vocab_seed", 0)),
                id_prefix=str(doc.get("id_prefix", "synth")),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise CorpusError(f"bad synth config: {e}") from None

    def to_dict(self) -> dict:
        return {
            "n_sentences": self.n_sentences,
            "k_distribution": {str(k): v for k, v in sorted(self.k_distribution.items())},
            "pattern_mix": {p.value: v for p, v in sorted(self.pattern_mix.items(), key=lambda kv: kv[0].value)},
            "condition_omission_rate": self.condition_omission_rate,
            "vocab_seed": self.vocab_seed,
            "id_prefix": self.id_prefix,
        }


def _rng_for(seed: int, index: int) -> random.Random:
    # Per-sentence stream derived from (seed, index); stable across platforms.
    digest = hashlib.blake2b(f"{seed}:{index}".encode(), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "little"))


def _draw_number(rng: random.Random, lo: int, hi: int, decimals: bool, used: set[str]) -> str:
    for _ in range(10_000):
        if decimals:
            text = f"{rng.randint(lo * 10, hi * 10) / 10:.1f}"
        else:
            text = str(rng.randint(lo, hi))
        if text not in used:
            used.add(text)
            return text
    raise CorpusError("number pool exhausted")


def build_vocab(seed: int) -> Vocabulary:
    """Deterministic vocabulary: alloy formulas, property/unit pairs with
    value pools, and condition values. All numeric surface forms are unique
    across pools."""
    rng = random.Random(seed)
    used: set[str] = set()

    alloys: list[str] = []
    while len(alloys) < 16:
        parts = rng.sample(_ELEMENTS, rng.randint(3, 5))
        name = "".join(
            p + (str(rng.randint(2, 9)) if rng.random() < 0.25 else "") for p in sorted(parts)
        )
        if name not in alloys:
            alloys.append(name)

    families = (
        ("yield strength", "MPa", 300, 1995, False),
        ("ultimate tensile strength", "MPa", 300, 1995, False),
        ("compressive strength", "MPa", 300, 1995, False),
        ("elastic modulus", "GPa", 60, 295, False),
        ("hardness", "HV", 150, 900, False),
        ("microhardness", "HV", 150, 900, False),
        ("elongation", "%", 1, 60, True),
        ("ductility", "%", 1, 60, True),
    )
    properties = []
    for name, unit, lo, hi, decimals in families:
        values = tuple(
            (f"{_draw_number(rng, lo, hi, decimals, used)}%" if unit == "%"
             else f"{_draw_number(rng, lo, hi, decimals, used)} {unit}")
            for _ in range(10)
        )
        properties.append(PropertySpec(name, unit, values))

    condition_values = ["RT"]
    for _ in range(6):
        condition_values.append(f"{_draw_number(rng, 100, 1100, False, used)}°C")
    for _ in range(3):
        condition_values.append(f"{_draw_number(rng, 77, 1273, False, used)} K")

    vocab = Vocabulary(tuple(alloys), tuple(properties), tuple(condition_values))
    for name in vocab.alloys:
        if not ALLOY_NAME_RE.match(name):
            raise CorpusError(f"generated alloy name {name!r} breaks the formula grammar")
    return vocab


class _Builder:
    """Appends literals and entity spans, tracking character offsets."""

    def __init__(self) -> None:
        self._parts: list[str] = []
        self._pos = 0

    def lit(self, text: str) -> None:
        self._parts.append(text)
        self._pos += len(text)

    def span(self, etype: EntityType, text: str) -> EntitySpan:
        start = self._pos
        self.lit(text)
        return EntitySpan(etype, start, self._pos, text)

    @property
    def text(self) -> str:
        return "".join(self._parts)


def _join_items(builder: _Builder, items: list, emit) -> None:
    # Oxford-comma list: "x", "x and y", "x, y, and z".
    for i, item in enumerate(items):
        if i > 0:
            builder.lit(", " if len(items) > 2 else " ")
            if i == len(items) - 1:
                builder.lit("and ")
        emit(item)


def _condition_clause(builder: _Builder, cv_text: str) -> tuple[EntitySpan, EntitySpan]:
    builder.lit(" at a ")
    cond = builder.span(EntityType.CONDITION, "temperature")
    builder.lit(" of ")
    cv = builder.span(EntityType.CONDITION_VALUE, cv_text)
    return cond, cv


_VERBS = ("exhibits", "has", "shows", "demonstrates")
_B_LEADS = ("Depending on the test temperature, ", "Across the test temperature range, ")
_C_VERBS = ("reaches", "attains")


def _article(word: str) -> str:
    return "an " if word[0] in "aeiou" else "a "


def _sentence_a(rng: random.Random, vocab: Vocabulary, k: int, omission: float):
    b = _Builder()
    props = rng.sample(vocab.properties, k)
    cvs = rng.sample(vocab.condition_values, k)
    mat = b.span(EntityType.MATERIAL, rng.choice(vocab.alloys))
    b.lit(f" {rng.choice(_VERBS)} ")
    tuples = []

    def emit(item) -> None:
        spec, cv_text = item
        b.lit(_article(spec.name))
        prop = b.span(EntityType.PROPERTY, spec.name)
        b.lit(" of ")
        value = b.span(EntityType.PROPERTY_VALUE, rng.choice(spec.values))
        cond = cv = None
        if rng.random() >= omission:
            cond, cv = _condition_clause(b, cv_text)
        tuples.append(TupleRecord(mat, prop, value, cond, cv))

    _join_items(b, list(zip(props, cvs)), emit)
    b.lit(".")
    return b.text, tuples


def _sentence_b(rng: random.Random, vocab: Vocabulary, k: int):
    # All tuples share the material, property, and condition spans.
    b = _Builder()
    lead = rng.choice(_B_LEADS)
    head, tail = lead.split("temperature", 1)
    b.lit(head)
    cond = b.span(EntityType.CONDITION, "temperature")
    b.lit(tail)
    mat = b.span(EntityType.MATERIAL, rng.choice(vocab.alloys))
    spec = rng.choice(vocab.properties)
    b.lit(f" {rng.choice(_VERBS)} {_article(spec.name)}")
    prop = b.span(EntityType.PROPERTY, spec.name)
    b.lit(" of ")
    values = rng.sample(spec.values, k)
    cvs = rng.sample(vocab.condition_values, k)
    tuples = []

    def emit(item) -> None:
        value_text, cv_text = item
        value = b.span(EntityType.PROPERTY_VALUE, value_text)
        b.lit(" at ")
        cv = b.span(EntityType.CONDITION_VALUE, cv_text)
        tuples.append(TupleRecord(mat, prop, value, cond, cv))

    _join_items(b, list(zip(values, cvs)), emit)
    b.lit(".")
    return b.text, tuples


def _sentence_c(rng: random.Random, vocab: Vocabulary, k: int, omission: float):
    b = _Builder()
    b.lit("The ")
    spec = rng.choice(vocab.properties)
    prop = b.span(EntityType.PROPERTY, spec.name)
    b.lit(" of ")
    mats = [b_ for b_ in rng.sample(vocab.alloys, k)]
    mat_spans: list[EntitySpan] = []
    _join_items(b, mats, lambda name: mat_spans.append(b.span(EntityType.MATERIAL, name)))
    b.lit(f" {rng.choice(_C_VERBS)} ")
    values = rng.sample(spec.values, k)
    cvs = rng.sample(vocab.condition_values, k)
    tuples = []

    def emit(item) -> None:
        mat, value_text, cv_text = item
        value = b.span(EntityType.PROPERTY_VALUE, value_text)
        cond = cv = None
        if rng.random() >= omission:
            cond, cv = _condition_clause(b, cv_text)
        tuples.append(TupleRecord(mat, prop, value, cond, cv))

    _join_items(b, list(zip(mat_spans, values, cvs)), emit)
    b.lit(", respectively." if k > 1 else ".")
    return b.text, tuples


def _sentence_d(rng: random.Random, vocab: Vocabulary, k: int, omission: float):
    # Repeat measurements: every tuple shares all slots except the value.
    b = _Builder()
    b.lit("The ")
    spec = rng.choice(vocab.properties)
    prop = b.span(EntityType.PROPERTY, spec.name)
    b.lit(" of ")
    mat = b.span(EntityType.MATERIAL, rng.choice(vocab.alloys))
    b.lit(" reached ")
    values = rng.sample(spec.values, k)
    value_spans: list[EntitySpan] = []
    _join_items(b, values, lambda v: value_spans.append(b.span(EntityType.PROPERTY_VALUE, v)))
    if k > 1:
        b.lit(" in repeated tests")
    cond = cv = None
    if rng.random() >= omission:
        cond, cv = _condition_clause(b, rng.choice(vocab.condition_values))
    b.lit(".")
    tuples = [TupleRecord(mat, prop, v, cond, cv) for v in value_spans]
    return b.text, tuples


def _weighted_choice(rng: random.Random, dist: Mapping) -> object:
    roll = rng.random()
    acc = 0.0
    items = sorted(dist.items(), key=lambda kv: str(kv[0]))
    for key, p in items:
        acc += p
        if roll < acc:
            return key
    return items[-1][0]


def generate(config: SynthConfig, seed: int) -> Dataset:
    """Generate a labeled dataset. Same (config, seed) gives identical output."""
    vocab = build_vocab(config.vocab_seed)
    sentences = []
    for i in range(config.n_sentences):
        rng = _rng_for(seed, i)
        k = _weighted_choice(rng, config.k_distribution)
        pattern = _weighted_choice(rng, config.pattern_mix)
        if pattern is Pattern.ONE_MATERIAL_MANY_PROPERTIES:
            text, tuples = _sentence_a(rng, vocab, k, config.condition_omission_rate)
        elif pattern is Pattern.SHARED_PAIR_MANY_CONDITIONS:
            text, tuples = _sentence_b(rng, vocab, k)
        elif pattern is Pattern.SHARED_CONTEXT_MANY_VALUES:
            text, tuples = _sentence_d(rng, vocab, k, config.condition_omission_rate)
        else:
            text, tuples = _sentence_c(rng, vocab, k, config.condition_omission_rate)
        sentences.append(AnnotatedSentence(f"{config.id_prefix}-{i:05d}", text, tuple(tuples)))
    return Dataset(tuple(sentences))
