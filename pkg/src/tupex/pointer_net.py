"""Span extraction over frozen token embeddings.

Each entity type gets two per-token binary classifiers, one for span
starts and one for span ends. A token is labeled when its probability
meets the type's threshold (inclusive), and spans are decoded by pairing
each start, left to right, with the nearest unconsumed end at or after
it. Heads are linear by default; a single tanh hidden layer is available
via config. All gradients are written by hand, nothing here depends on
an autodiff framework.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import AnnotatedSentence, EntitySpan, EntityType, TYPE_ORDER
from .embedding import EmbeddingRecord, TokenizedSentence, align_span

SIDES = ("start", "end")
HeadKey = tuple[EntityType, str]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, 1e-12, 1.0 - 1e-12)


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


@dataclass
class LinearHead:
    w: np.ndarray  # (dim,)
    b: float

    def scores(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w + self.b

    def grads(self, x: np.ndarray, dz: np.ndarray) -> "LinearHead":
        return LinearHead(x.T @ dz, float(dz.sum()))

    def step(self, grad: "LinearHead", lr: float) -> None:
        self.w -= lr * grad.w
        self.b -= lr * grad.b


@dataclass
class MlpHead:
    """One tanh hidden layer: w2 . tanh(w1 x + b1) + b2."""

    w1: np.ndarray  # (hidden, dim)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float

    def scores(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(x @ self.w1.T + self.b1) @ self.w2 + self.b2

    def grads(self, x: np.ndarray, dz: np.ndarray) -> "MlpHead":
        a = np.tanh(x @ self.w1.T + self.b1)  # (n, hidden)
        dpre = (dz[:, None] * self.w2[None, :]) * (1.0 - a * a)
        return MlpHead(dpre.T @ x, dpre.sum(axis=0), a.T @ dz, float(dz.sum()))

    def step(self, grad: "MlpHead", lr: float) -> None:
        self.w1 -= lr * grad.w1
        self.b1 -= lr * grad.b1
        self.w2 -= lr * grad.w2
        self.b2 -= lr * grad.b2


Head = LinearHead | MlpHead


@dataclass
class PointerHeadParams:
    dim: int
    hidden_width: int
    heads: dict[HeadKey, Head]
    thresholds: dict[HeadKey, float]

    def __post_init__(self) -> None:
        for key, beta in self.thresholds.items():
            if not 0.0 < beta < 1.0:
                raise ValueError(f"threshold for {key} must lie in (0, 1), got {beta}")

    def clone(self) -> "PointerHeadParams":
        return copy.deepcopy(self)


def init_params(
    seed: int,
    dim: int,
    hidden_width: int = 0,
    threshold: float | Mapping[HeadKey, float] = 0.5,
) -> PointerHeadParams:
    """Seeded uniform init in [-1/sqrt(dim), +1/sqrt(dim)] for every array."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(dim)
    heads: dict[HeadKey, Head] = {}
    for etype in TYPE_ORDER:
        for side in SIDES:
            if hidden_width > 0:
                heads[(etype, side)] = MlpHead(
                    rng.uniform(-bound, bound, (hidden_width, dim)),
                    rng.uniform(-bound, bound, hidden_width),
                    rng.uniform(-bound, bound, hidden_width),
                    float(rng.uniform(-bound, bound)),
                )
            else:
                heads[(etype, side)] = LinearHead(
                    rng.uniform(-bound, bound, dim), float(rng.uniform(-bound, bound))
                )
    if isinstance(threshold, Mapping):
        thresholds = dict(threshold)
    else:
        thresholds = {(t, s): float(threshold) for t in TYPE_ORDER for s in SIDES}
    return PointerHeadParams(dim, hidden_width, heads, thresholds)


@dataclass(frozen=True, eq=False)
class PointerScores:
    sentence_id: str
    probs: dict[HeadKey, np.ndarray]


@dataclass(frozen=True, eq=False)
class PointerLabels:
    sentence_id: str
    labels: dict[HeadKey, np.ndarray]  # int8 vectors of 0/1


def score_pointers(params: PointerHeadParams, emb: EmbeddingRecord) -> PointerScores:
    if emb.dim != params.dim:
        raise ValueError(f"embedding dim {emb.dim} does not match params dim {params.dim}")
    x = emb.vectors.astype(np.float64)
    probs = {key: _sigmoid(head.scores(x)) for key, head in params.heads.items()}
    return PointerScores(emb.sentence_id, probs)


def threshold_labels(scores: PointerScores, params: PointerHeadParams) -> PointerLabels:
    labels = {
        key: (p >= params.thresholds[key]).astype(np.int8) for key, p in scores.probs.items()
    }
    return PointerLabels(scores.sentence_id, labels)


def decode_spans(
    labels: PointerLabels, tok: TokenizedSentence, text: str
) -> dict[EntityType, list[EntitySpan]]:
    """Greedy nearest-end pairing, types independent, ends consumed at most
    once. A start with no remaining end at or after it emits nothing."""
    out: dict[EntityType, list[EntitySpan]] = {}
    for etype in TYPE_ORDER:
        starts = np.flatnonzero(labels.labels[(etype, "start")]).tolist()
        ends = np.flatnonzero(labels.labels[(etype, "end")]).tolist()
        spans: list[EntitySpan] = []
        e_idx = 0
        for h in starts:
            while e_idx < len(ends) and ends[e_idx] < h:
                e_idx += 1
            if e_idx == len(ends):
                break
            t = ends[e_idx]
            e_idx += 1
            c_start = tok.tokens[h][0]
            c_end = tok.tokens[t][1]
            spans.append(EntitySpan(etype, c_start, c_end, text[c_start:c_end]))
        out[etype] = list(dict.fromkeys(spans))
    return out


def gold_labels(sentence: AnnotatedSentence, tok: TokenizedSentence) -> PointerLabels:
    """Token-level start/end labels from gold spans via minimal token cover."""
    n = len(tok.tokens)
    labels = {(t, s): np.zeros(n, dtype=np.int8) for t in TYPE_ORDER for s in SIDES}
    for record in sentence.tuples:
        for etype, span in record.slots():
            if span is None:
                continue
            i, j = align_span(span, tok)
            labels[(etype, "start")][i] = 1
            labels[(etype, "end")][j] = 1
    return PointerLabels(sentence.id, labels)


Batch = Sequence[tuple[EmbeddingRecord, PointerLabels]]


def _check_batch(params: PointerHeadParams, batch: Batch) -> None:
    if not batch:
        raise ValueError("empty batch")
    for emb, labels in batch:
        n = emb.vectors.shape[0]
        if n == 0:
            raise ValueError(f"sentence {emb.sentence_id} has no tokens")
        for key in params.heads:
            if labels.labels[key].shape[0] != n:
                raise ValueError(f"sentence {emb.sentence_id}: label/token count mismatch")


def _stacked(params: PointerHeadParams, batch: Batch):
    # One token matrix for the whole batch, with per-token weights carrying
    # the per-sentence 1/(n_types * n_tokens) normalization and batch mean.
    x = np.concatenate([emb.vectors.astype(np.float64) for emb, _ in batch])
    weights = np.concatenate(
        [
            np.full(emb.vectors.shape[0], 1.0 / (len(TYPE_ORDER) * emb.vectors.shape[0] * len(batch)))
            for emb, _ in batch
        ]
    )
    labels = {
        key: np.concatenate([gold.labels[key].astype(np.float64) for _, gold in batch])
        for key in params.heads
    }
    return x, weights, labels


def extraction_loss(params: PointerHeadParams, batch: Batch) -> float:
    """Full binary cross-entropy over types, tokens, and both sides,
    normalized per sentence by n_types * n_tokens, averaged over the batch."""
    _check_batch(params, batch)
    x, weights, labels = _stacked(params, batch)
    total = 0.0
    for key, head in params.heads.items():
        z = head.scores(x)
        label = labels[key]
        total += float(
            (weights * (label * _softplus(-z) + (1.0 - label) * _softplus(z))).sum()
        )
    return total


def extraction_grad(params: PointerHeadParams, batch: Batch) -> dict[HeadKey, Head]:
    """Hand-written gradient of extraction_loss: per token (p - label) times
    the input, pushed through the head."""
    _check_batch(params, batch)
    x, weights, labels = _stacked(params, batch)
    grads: dict[HeadKey, Head] = {}
    for key, head in params.heads.items():
        p = _sigmoid(head.scores(x))
        dz = (p - labels[key]) * weights
        grads[key] = head.grads(x, dz)
    return grads


def apply_gradient(params: PointerHeadParams, grads: dict[HeadKey, Head], lr: float) -> None:
    for key, head in params.heads.items():
        head.step(grads[key], lr)


@dataclass(frozen=True)
class ExtractorTrainConfig:
    lr: float = 0.05
    epochs: int = 100
    hidden_width: int = 0
    threshold: float = 0.5


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


def train_extractor(
    seed: int, train: Batch, val: Batch, config: ExtractorTrainConfig
) -> tuple[PointerHeadParams, list[EpochStats]]:
    """Plain full-batch gradient descent; returns the parameters from the
    epoch with the lowest validation loss (earliest on ties) and the loss
    log. Bitwise deterministic for a fixed seed and inputs."""
    if not train or not val:
        raise ValueError("train and validation batches must be non-empty")
    dim = train[0][0].dim
    params = init_params(seed, dim, config.hidden_width, config.threshold)
    _check_batch(params, train)
    _check_batch(params, val)
    # Stack once; per-epoch work is then a handful of matmuls per head.
    tx, tw, tl = _stacked(params, train)
    vx, vw, vl = _stacked(params, val)

    def losses(key: str | tuple, z: np.ndarray, which: str) -> float:
        label = (tl if which == "train" else vl)[key]
        w = tw if which == "train" else vw
        return float((w * (label * _softplus(-z) + (1.0 - label) * _softplus(z))).sum())

    z_train = {key: head.scores(tx) for key, head in params.heads.items()}
    best = params.clone()
    best_val = sum(
        losses(key, head.scores(vx), "val") for key, head in params.heads.items()
    )
    log: list[EpochStats] = []
    for epoch in range(config.epochs):
        for key, head in params.heads.items():
            dz = (_sigmoid(z_train[key]) - tl[key]) * tw
            head.step(head.grads(tx, dz), config.lr)
        train_loss = 0.0
        val_loss = 0.0
        for key, head in params.heads.items():
            z_train[key] = head.scores(tx)
            train_loss += losses(key, z_train[key], "train")
            val_loss += losses(key, head.scores(vx), "val")
        log.append(EpochStats(epoch, train_loss, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best = params.clone()
    return best, log
