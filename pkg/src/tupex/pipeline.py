"""End-to-end glue: embedding maps, gold label and feature preparation,
two-stage training wrappers, extraction, prediction files, evaluation."""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import allocator, metrics, pointer_net
from .allocator import AllocFlags, AllocParams, MatcherTrainConfig, ScoredTuple
from .corpus import (
    AnnotatedSentence,
    CorpusError,
    Dataset,
    EntitySpan,
    EntityType,
    TYPE_ORDER,
    TupleRecord,
    _span_dict,
    _tuple_dict,
    canonical_json_bytes,
    parse_dataset,
    split_by_tuple_count,
)
from .embedding import EmbeddedSentence, synthetic_embed
from .metrics import MatchCounts
from .pointer_net import ExtractorTrainConfig, PointerHeadParams

SELECTORS = ("1", "2", "3", "4", "random", "all")


def embed_dataset_synthetic(dataset: Dataset, dim: int, seed: int) -> dict[str, EmbeddedSentence]:
    return {s.id: synthetic_embed(s, dim, seed) for s in dataset.sentences}


def require_embeddings(
    dataset: Dataset, emb_map: Mapping[str, EmbeddedSentence]
) -> None:
    missing = [s.id for s in dataset.sentences if s.id not in emb_map]
    if missing:
        raise CorpusError(f"missing embeddings for sentences: {', '.join(missing[:5])}")


def select_dataset(dataset: Dataset, selector: str, seed: int = 0) -> Dataset:
    """Slice by tuple count (1..4), take a seeded ~10% random sample, or
    pass through with 'all'."""
    if selector == "all":
        return dataset
    if selector == "random":
        n = len(dataset.sentences)
        take = max(1, (n + 5) // 10) if n else 0
        idx = sorted(random.Random(seed).sample(range(n), take)) if n else []
        return Dataset(tuple(dataset.sentences[i] for i in idx))
    if selector in ("1", "2", "3", "4"):
        return split_by_tuple_count(dataset)[int(selector)]
    raise CorpusError(f"unknown dataset selector {selector!r}; pick one of {SELECTORS}")


def gold_entities(sentence: AnnotatedSentence) -> dict[EntityType, list[EntitySpan]]:
    return metrics.spans_from_tuples(sentence.tuples)


# ---------------------------------------------------------------------------
# Stage 1: extractor training

def extractor_batch(
    dataset: Dataset, emb_map: Mapping[str, EmbeddedSentence]
) -> pointer_net.Batch:
    require_embeddings(dataset, emb_map)
    batch = []
    for s in dataset.sentences:
        tok, rec = emb_map[s.id]
        batch.append((rec, pointer_net.gold_labels(s, tok)))
    return batch


def train_extraction_stage(
    train: Dataset,
    val: Dataset,
    emb_map: Mapping[str, EmbeddedSentence],
    seed: int,
    config: ExtractorTrainConfig,
) -> tuple[PointerHeadParams, list[pointer_net.EpochStats]]:
    return pointer_net.train_extractor(
        seed, extractor_batch(train, emb_map), extractor_batch(val, emb_map), config
    )


# ---------------------------------------------------------------------------
# Stage 2: matcher training

def _reps(
    spans: Sequence[EntitySpan], tok, rec
) -> list[allocator.EntityRep]:
    return [allocator.entity_repr(s, tok, rec) for s in spans]


def matcher_instances(
    dataset: Dataset, emb_map: Mapping[str, EmbeddedSentence], flags: AllocFlags
) -> list[allocator.Instance]:
    """Per sentence and per non-anchor type: features for every
    (property value, candidate) pair, gold 1 for pairs sharing a tuple."""
    require_embeddings(dataset, emb_map)
    instances: list[allocator.Instance] = []
    for s in dataset.sentences:
        entities = gold_entities(s)
        anchors = entities[EntityType.PROPERTY_VALUE]
        if not anchors:
            continue
        tok, rec = emb_map[s.id]
        anchor_reps = _reps(anchors, tok, rec)
        anchor_index = {span.offsets: i for i, span in enumerate(anchors)}
        for etype in allocator.SLOT_TYPES:
            others = entities[etype]
            if not others:
                continue
            other_index = {span.offsets: j for j, span in enumerate(others)}
            gold = np.zeros((len(anchors), len(others)))
            for record in s.tuples:
                other_span = dict(record.slots())[etype]
                if other_span is None:
                    continue
                gold[anchor_index[record.property_value.offsets], other_index[other_span.offsets]] = 1.0
            feats = allocator.match_features(anchor_reps, _reps(others, tok, rec), flags)
            instances.append((feats, gold))
    return instances


def train_matching_stage(
    train: Dataset,
    val: Dataset,
    emb_map: Mapping[str, EmbeddedSentence],
    seed: int,
    config: MatcherTrainConfig,
    dim: int,
    lam: float = allocator.DEFAULT_LAMBDA,
    flags: AllocFlags = AllocFlags(),
) -> tuple[AllocParams, list[allocator.MatcherEpochStats]]:
    return allocator.train_matcher(
        seed,
        matcher_instances(train, emb_map, flags),
        matcher_instances(val, emb_map, flags),
        config,
        dim,
        lam,
        flags,
    )


# ---------------------------------------------------------------------------
# Extraction

@dataclass(frozen=True)
class PredictedSentence:
    id: str
    text: str
    entities: dict[EntityType, list[EntitySpan]]
    tuples: tuple[ScoredTuple, ...]


@dataclass(frozen=True)
class Predictions:
    sentences: tuple[PredictedSentence, ...]

    def sentence_map(self) -> dict[str, PredictedSentence]:
        return {s.id: s for s in self.sentences}


def extract_sentence(
    text: str,
    pair: EmbeddedSentence,
    pointer_params: PointerHeadParams,
    alloc_params: AllocParams | None,
) -> tuple[dict[EntityType, list[EntitySpan]], list[ScoredTuple]]:
    tok, rec = pair
    scores = pointer_net.score_pointers(pointer_params, rec)
    labels = pointer_net.threshold_labels(scores, pointer_params)
    entities = pointer_net.decode_spans(labels, tok, text)
    if alloc_params is None:
        return entities, allocator.assemble_tuples(
            entities, {}, AllocParams(pointer_params.dim, np.zeros(6 * pointer_params.dim), 0.0,
                                      flags=AllocFlags(enable_allocation=False))
        )
    anchors = entities[EntityType.PROPERTY_VALUE]
    matrices = {}
    if alloc_params.flags.enable_allocation and anchors:
        anchor_reps = _reps(anchors, tok, rec)
        for etype in allocator.SLOT_TYPES:
            others = entities[etype]
            if not others:
                continue
            matrix = allocator.score_matrix(alloc_params, anchor_reps, _reps(others, tok, rec))
            matrices[etype] = allocator.apply_diagonal_boost(matrix, alloc_params.lam)
    return entities, allocator.assemble_tuples(entities, matrices, alloc_params)


def extract_dataset(
    dataset: Dataset,
    emb_map: Mapping[str, EmbeddedSentence],
    pointer_params: PointerHeadParams,
    alloc_params: AllocParams | None,
    threads: int = 1,
) -> Predictions:
    require_embeddings(dataset, emb_map)

    def run(s: AnnotatedSentence) -> PredictedSentence:
        entities, scored = extract_sentence(s.text, emb_map[s.id], pointer_params, alloc_params)
        return PredictedSentence(s.id, s.text, entities, tuple(scored))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(run, dataset.sentences))
    else:
        out = [run(s) for s in dataset.sentences]
    return Predictions(tuple(out))


# ---------------------------------------------------------------------------
# Prediction files: the corpus schema plus per-tuple scores and a raw
# per-sentence entity section.

def predictions_doc(preds: Predictions, config_echo: dict | None = None) -> dict:
    sentences = []
    for s in preds.sentences:
        tuples = []
        for st in s.tuples:
            obj = _tuple_dict(st.record)
            obj["score"] = st.score
            tuples.append(obj)
        sentences.append(
            {
                "id": s.id,
                "text": s.text,
                "entities": {
                    t.value: [_span_dict(sp) for sp in s.entities.get(t, [])] for t in TYPE_ORDER
                },
                "tuples": tuples,
            }
        )
    doc: dict = {"sentences": sentences}
    if config_echo is not None:
        doc["meta"] = {"config": config_echo}
    return doc


def serialize_predictions(preds: Predictions, config_echo: dict | None = None) -> bytes:
    return canonical_json_bytes(predictions_doc(preds, config_echo))


def parse_predictions(raw: bytes | str) -> Predictions:
    """Parse a prediction file. A plain gold corpus is accepted: scores
    default to 1 and the entity section is derived from tuple slots."""
    core = parse_dataset(raw)
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    doc = json.loads(raw)
    out = []
    for s, s_doc in zip(core.sentences, doc["sentences"]):
        raw_entities = s_doc.get("entities")
        if raw_entities is None:
            entities = metrics.spans_from_tuples(s.tuples)
        else:
            if not isinstance(raw_entities, dict) or not set(raw_entities) <= {
                t.value for t in TYPE_ORDER
            }:
                raise CorpusError(f"sentence {s.id}: malformed entity section")
            entities = {t: [] for t in TYPE_ORDER}
            for etype in TYPE_ORDER:
                for span_doc in raw_entities.get(etype.value, []):
                    if (
                        not isinstance(span_doc, dict)
                        or set(span_doc) != {"start", "end", "text"}
                    ):
                        raise CorpusError(f"sentence {s.id}: malformed entity span")
                    span = EntitySpan(etype, span_doc["start"], span_doc["end"], span_doc["text"])
                    if s.text[span.start : span.end] != span.text:
                        raise CorpusError(
                            f"sentence {s.id}: entity span text does not match the sentence"
                        )
                    entities[etype].append(span)
        scores = [
            float(t.get("score", 1.0)) if isinstance(t, dict) else 1.0
            for t in s_doc["tuples"]
        ]
        scored = tuple(ScoredTuple(r, sc) for r, sc in zip(s.tuples, scores))
        out.append(PredictedSentence(s.id, s.text, entities, scored))
    return Predictions(tuple(out))


# ---------------------------------------------------------------------------
# Evaluation

@dataclass(frozen=True)
class EvalCounts:
    per_type: dict[EntityType, MatchCounts]
    tuples: MatchCounts


def evaluate_predictions(preds: Predictions, gold: Dataset) -> EvalCounts:
    """Aggregate exact-match counts over the gold sentences. Predictions for
    unknown sentences are ignored; gold sentences without predictions count
    as empty output."""
    pred_map = preds.sentence_map()
    per_type = {t: MatchCounts() for t in TYPE_ORDER}
    tuples = MatchCounts()
    for s in gold.sentences:
        p = pred_map.get(s.id)
        pred_entities: Mapping[EntityType, Sequence[EntitySpan]] = (
            p.entities if p is not None else {}
        )
        pred_tuples: list[TupleRecord] = [st.record for st in p.tuples] if p is not None else []
        gold_ents = metrics.spans_from_tuples(s.tuples)
        for etype, c in metrics.entity_counts(pred_entities, gold_ents).items():
            per_type[etype] = per_type[etype] + c
        tuples = tuples + metrics.tuple_match_counts(pred_tuples, list(s.tuples))
    return EvalCounts(per_type, tuples)
