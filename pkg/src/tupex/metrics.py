"""Exact-match precision/recall/F1 for entities and tuples.

An entity counts as correct only on an exact (type, start, end) match;
each gold item can be consumed once. A tuple counts as correct only when
all five slots match exactly, absent slots matching absent. Conventions:
0/0 ratios are 0, and predicted tuples are deduplicated before counting.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import EntitySpan, EntityType, TYPE_ORDER, TupleRecord


@dataclass(frozen=True)
class MetricTriple:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class MatchCounts:
    correct: int = 0
    predicted: int = 0
    gold: int = 0

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(
            self.correct + other.correct,
            self.predicted + other.predicted,
            self.gold + other.gold,
        )

    def to_dict(self) -> dict:
        return {"correct": self.correct, "predicted": self.predicted, "gold": self.gold}


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean, 0 when both inputs are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def prf(counts: MatchCounts) -> MetricTriple:
    p = counts.correct / counts.predicted if counts.predicted else 0.0
    r = counts.correct / counts.gold if counts.gold else 0.0
    return MetricTriple(p, r, f1_score(p, r))


def span_match_counts(
    pred: Sequence[EntitySpan], gold: Sequence[EntitySpan]
) -> MatchCounts:
    """One-to-one matching on (start, end) within a single type and sentence."""
    available = Counter(s.offsets for s in gold)
    correct = 0
    for span in pred:
        if available[span.offsets] > 0:
            available[span.offsets] -= 1
            correct += 1
    return MatchCounts(correct, len(pred), len(gold))


def entity_counts(
    pred: Mapping[EntityType, Sequence[EntitySpan]],
    gold: Mapping[EntityType, Sequence[EntitySpan]],
) -> dict[EntityType, MatchCounts]:
    return {
        etype: span_match_counts(pred.get(etype, ()), gold.get(etype, ()))
        for etype in TYPE_ORDER
    }


def entity_prf(
    pred: Mapping[EntityType, Sequence[EntitySpan]],
    gold: Mapping[EntityType, Sequence[EntitySpan]],
) -> dict[EntityType, MetricTriple]:
    return {etype: prf(c) for etype, c in entity_counts(pred, gold).items()}


def tuple_key(record: TupleRecord) -> tuple:
    return tuple(None if span is None else span.offsets for _, span in record.slots())


def dedup_tuples(records: Iterable[TupleRecord]) -> list[TupleRecord]:
    seen: set[tuple] = set()
    out = []
    for r in records:
        key = tuple_key(r)
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def tuple_match_counts(
    pred: Sequence[TupleRecord], gold: Sequence[TupleRecord]
) -> MatchCounts:
    deduped = dedup_tuples(pred)
    available = Counter(tuple_key(r) for r in gold)
    correct = 0
    for r in deduped:
        key = tuple_key(r)
        if available[key] > 0:
            available[key] -= 1
            correct += 1
    return MatchCounts(correct, len(deduped), len(gold))


def tuple_prf(pred: Sequence[TupleRecord], gold: Sequence[TupleRecord]) -> MetricTriple:
    return prf(tuple_match_counts(pred, gold))


def spans_from_tuples(records: Iterable[TupleRecord]) -> dict[EntityType, list[EntitySpan]]:
    """Per-type deduplicated slot spans, for when no raw extraction output
    is available."""
    out: dict[EntityType, list[EntitySpan]] = {t: [] for t in TYPE_ORDER}
    seen: dict[EntityType, set[tuple[int, int]]] = {t: set() for t in TYPE_ORDER}
    for record in records:
        for etype, span in record.slots():
            if span is None or span.offsets in seen[etype]:
                continue
            seen[etype].add(span.offsets)
            out[etype].append(span)
    for etype in TYPE_ORDER:
        out[etype].sort(key=lambda s: s.offsets)
    return out
