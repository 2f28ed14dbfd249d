"""Entity allocation: decide which extracted entities belong to the same
tuple.

Every property value acts as an anchor. For each other entity type a
match matrix is scored from concatenated features of the anchor, the
candidate, their scaled-dot-product cross attention (unnormalized sums),
and each side's softmax self attention. A learned weight vector over the
six concatenated blocks plus a sigmoid yields pair probabilities; on
square matrices an inference-time factor lifts the diagonal, encoding
that parallel listings line up in order. Each slot is filled by the
row's best candidate (ties to the lowest index). The whole feature
pipeline is parameter-free, so training reduces to a hand-differentiated
logistic fit of the weight vector.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import (
    EntitySpan,
    EntityType,
    MANDATORY_TYPES,
    TYPE_ORDER,
    TupleRecord,
)
from .embedding import EmbeddingRecord, TokenizedSentence, align_span

logger = logging.getLogger(__name__)

SLOT_TYPES = tuple(t for t in TYPE_ORDER if t is not EntityType.PROPERTY_VALUE)
DEFAULT_LAMBDA = 1.2
_PROB_CEIL = 1.0 - 1e-12


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, 1e-12, _PROB_CEIL)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class EntityRep:
    """An entity with its vector: the sum of its tokens' embeddings."""

    span: EntitySpan
    vec: np.ndarray  # (dim,) float64


def entity_repr(span: EntitySpan, tok: TokenizedSentence, emb: EmbeddingRecord) -> EntityRep:
    i, j = align_span(span, tok)
    return EntityRep(span, emb.vectors[i : j + 1].astype(np.float64).sum(axis=0))


def _matrix_of(reps: Sequence[EntityRep]) -> np.ndarray:
    return np.stack([r.vec for r in reps])


def correlation(anchors: Sequence[EntityRep], others: Sequence[EntityRep]) -> np.ndarray:
    """Pairwise scaled dot products, (n_anchors, n_others)."""
    h = _matrix_of(anchors)
    g = _matrix_of(others)
    return (h @ g.T) / np.sqrt(h.shape[1])


def inter_attention(
    s: np.ndarray, anchors: Sequence[EntityRep], others: Sequence[EntityRep]
) -> tuple[np.ndarray, np.ndarray]:
    """Cross-side summaries: for each anchor the S-weighted sum of the other
    side's vectors, and vice versa. Sums are deliberately unnormalized."""
    h = _matrix_of(anchors)
    g = _matrix_of(others)
    return s @ g, s.T @ h


def intra_attention(reps: Sequence[EntityRep]) -> np.ndarray:
    """Within-side summaries via row softmax over scaled dot products."""
    h = _matrix_of(reps)
    mu = _softmax_rows((h @ h.T) / np.sqrt(h.shape[1]))
    return mu @ h


@dataclass(frozen=True)
class AllocFlags:
    enable_inter: bool = True
    enable_intra: bool = True
    enable_allocation: bool = True


@dataclass
class AllocParams:
    dim: int
    u: np.ndarray  # (6 * dim,)
    bias: float
    lam: float = DEFAULT_LAMBDA
    flags: AllocFlags = field(default_factory=AllocFlags)

    def __post_init__(self) -> None:
        self.u = np.asarray(self.u, dtype=np.float64)
        if self.u.shape != (6 * self.dim,):
            raise ValueError(f"weight vector must have shape ({6 * self.dim},)")
        if not np.isfinite(self.lam) or self.lam < 1.0:
            raise ValueError(f"diagonal factor must be >= 1, got {self.lam}")

    def clone(self) -> "AllocParams":
        return AllocParams(self.dim, self.u.copy(), self.bias, self.lam, self.flags)


def init_alloc_params(
    seed: int, dim: int, lam: float = DEFAULT_LAMBDA, flags: AllocFlags = AllocFlags()
) -> AllocParams:
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(6 * dim)
    return AllocParams(dim, rng.uniform(-bound, bound, 6 * dim), float(rng.uniform(-bound, bound)), lam, flags)


def match_features(
    anchors: Sequence[EntityRep], others: Sequence[EntityRep], flags: AllocFlags
) -> np.ndarray:
    """Per-pair feature tensor (n, m, 6*dim): anchor, candidate, both
    cross-attention summaries, both self-attention summaries. Disabled
    attention blocks are zeroed."""
    n, m = len(anchors), len(others)
    if n == 0 or m == 0:
        raise ValueError("match_features needs at least one entity on each side")
    d = anchors[0].vec.shape[0]
    h = _matrix_of(anchors)
    g = _matrix_of(others)
    if flags.enable_inter:
        s = correlation(anchors, others)
        a_o2a, a_a2o = inter_attention(s, anchors, others)
    else:
        a_o2a = np.zeros((n, d))
        a_a2o = np.zeros((m, d))
    if flags.enable_intra:
        a_aa = intra_attention(anchors)
        a_oo = intra_attention(others)
    else:
        a_aa = np.zeros((n, d))
        a_oo = np.zeros((m, d))
    feats = np.empty((n, m, 6 * d))
    feats[:, :, 0:d] = h[:, None, :]
    feats[:, :, d : 2 * d] = g[None, :, :]
    feats[:, :, 2 * d : 3 * d] = a_o2a[:, None, :]
    feats[:, :, 3 * d : 4 * d] = a_a2o[None, :, :]
    feats[:, :, 4 * d : 5 * d] = a_aa[:, None, :]
    feats[:, :, 5 * d : 6 * d] = a_oo[None, :, :]
    return feats


def match_score(
    params: AllocParams,
    anchor_vec: np.ndarray,
    other_vec: np.ndarray,
    a_other_to_anchor: np.ndarray,
    a_anchor_to_other: np.ndarray,
    a_anchor_self: np.ndarray,
    a_other_self: np.ndarray,
) -> tuple[float, float]:
    """Score one pair from its six feature blocks; returns (score, probability)."""
    if not params.flags.enable_inter:
        a_other_to_anchor = np.zeros_like(a_other_to_anchor)
        a_anchor_to_other = np.zeros_like(a_anchor_to_other)
    if not params.flags.enable_intra:
        a_anchor_self = np.zeros_like(a_anchor_self)
        a_other_self = np.zeros_like(a_other_self)
    feat = np.concatenate(
        [anchor_vec, other_vec, a_other_to_anchor, a_anchor_to_other, a_anchor_self, a_other_self]
    )
    z = float(feat @ params.u + params.bias)
    return z, float(_sigmoid(np.array([z]))[0])


@dataclass(frozen=True, eq=False)
class MatchMatrix:
    scores: np.ndarray  # (n, m) raw scores
    probs: np.ndarray  # (n, m) sigmoid probabilities, boosted or not
    boosted: bool = False


def score_matrix(
    params: AllocParams, anchors: Sequence[EntityRep], others: Sequence[EntityRep]
) -> MatchMatrix:
    feats = match_features(anchors, others, params.flags)
    z = feats @ params.u + params.bias
    return MatchMatrix(z, _sigmoid(z), boosted=False)


def apply_diagonal_boost(matrix: MatchMatrix, lam: float) -> MatchMatrix:
    """Scale the diagonal probabilities by lam on square matrices, clamped
    below 1. Non-square matrices pass through unchanged."""
    if not np.isfinite(lam) or lam < 1.0:
        raise ValueError(f"diagonal factor must be >= 1, got {lam}")
    n, m = matrix.probs.shape
    if n != m:
        return matrix
    probs = matrix.probs.copy()
    idx = np.arange(n)
    probs[idx, idx] = np.minimum(_PROB_CEIL, lam * probs[idx, idx])
    return MatchMatrix(matrix.scores, probs, boosted=True)


# ---------------------------------------------------------------------------
# Loss and gradient (logistic fit over precomputed features)

Instance = tuple[np.ndarray, np.ndarray]  # features (n, m, 6d), gold (n, m) in {0, 1}
InstanceBatch = Sequence[Instance]


def matching_loss(params: AllocParams, batch: InstanceBatch) -> float:
    """Full binary cross-entropy per pair, normalized per instance by the
    matrix size, averaged over instances."""
    if not batch:
        raise ValueError("empty batch")
    total = 0.0
    for feats, gold in batch:
        z = feats @ params.u + params.bias
        n, m = z.shape
        bce = gold * np.logaddexp(0.0, -z) + (1.0 - gold) * np.logaddexp(0.0, z)
        total += float(bce.sum()) / (n * m)
    return total / len(batch)


def matching_grad(params: AllocParams, batch: InstanceBatch) -> tuple[np.ndarray, float]:
    """Gradient of matching_loss in (weight vector, bias): per pair
    (p - gold) times the feature vector."""
    if not batch:
        raise ValueError("empty batch")
    gu = np.zeros_like(params.u)
    gb = 0.0
    for feats, gold in batch:
        z = feats @ params.u + params.bias
        n, m = z.shape
        coeff = (_sigmoid(z) - gold) / (n * m * len(batch))
        gu += np.einsum("nm,nmf->f", coeff, feats)
        gb += float(coeff.sum())
    return gu, gb


@dataclass(frozen=True)
class MatcherTrainConfig:
    lr: float = 0.05
    epochs: int = 200


@dataclass(frozen=True)
class MatcherEpochStats:
    epoch: int
    train_loss: float
    val_loss: float


def train_matcher(
    seed: int,
    train: InstanceBatch,
    val: InstanceBatch,
    config: MatcherTrainConfig,
    dim: int,
    lam: float = DEFAULT_LAMBDA,
    flags: AllocFlags = AllocFlags(),
) -> tuple[AllocParams, list[MatcherEpochStats]]:
    """Plain full-batch gradient descent on the matching loss; returns the
    parameters with the lowest validation loss (earliest on ties)."""
    if not train or not val:
        raise ValueError("train and validation batches must be non-empty")
    if not any(gold.any() for _, gold in train):
        raise ValueError("no positive pairs in the training data")
    params = init_alloc_params(seed, dim, lam, flags)

    def flat(batch: InstanceBatch):
        # Pairs are independent, so the whole batch is one weighted matrix.
        feats = np.concatenate([f.reshape(-1, f.shape[-1]) for f, _ in batch])
        gold = np.concatenate([g.reshape(-1) for _, g in batch])
        w = np.concatenate(
            [np.full(g.size, 1.0 / (g.size * len(batch))) for _, g in batch]
        )
        return feats, gold, w

    tf, tg, tw = flat(train)
    vf, vg, vw = flat(val)

    def loss(z: np.ndarray, gold: np.ndarray, w: np.ndarray) -> float:
        return float(
            (w * (gold * np.logaddexp(0.0, -z) + (1.0 - gold) * np.logaddexp(0.0, z))).sum()
        )

    z_train = tf @ params.u + params.bias
    best = params.clone()
    best_val = loss(vf @ params.u + params.bias, vg, vw)
    log: list[MatcherEpochStats] = []
    for epoch in range(config.epochs):
        coeff = (_sigmoid(z_train) - tg) * tw
        params.u -= config.lr * (coeff @ tf)
        params.bias -= config.lr * float(coeff.sum())
        z_train = tf @ params.u + params.bias
        train_loss = loss(z_train, tg, tw)
        val_loss = loss(vf @ params.u + params.bias, vg, vw)
        log.append(MatcherEpochStats(epoch, train_loss, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best = params.clone()
    return best, log


# ---------------------------------------------------------------------------
# Tuple assembly

@dataclass(frozen=True)
class ScoredTuple:
    record: TupleRecord
    score: float


def _cartesian(entities: Mapping[EntityType, Sequence[EntitySpan]]) -> list[ScoredTuple]:
    # Every combination over the types that are present; optional slots are
    # omitted entirely when no entity of that type was extracted.
    pools: list[list[EntitySpan | None]] = []
    for etype in TYPE_ORDER:
        found = list(entities.get(etype, ()))
        if etype in MANDATORY_TYPES:
            if not found:
                return []
            pools.append(found)
        else:
            pools.append(found if found else [None])
    if pools[3] == [None] and pools[4] != [None]:
        # A condition value without a condition cannot be represented.
        logger.warning("condition values extracted without any condition; dropping them")
        pools[4] = [None]
    out = []
    for mat, prop, value, cond, cv in itertools.product(*pools):
        out.append(ScoredTuple(TupleRecord(mat, prop, value, cond, cv), 1.0))
    return out


def assemble_tuples(
    entities: Mapping[EntityType, Sequence[EntitySpan]],
    matrices: Mapping[EntityType, MatchMatrix],
    params: AllocParams,
) -> list[ScoredTuple]:
    """One tuple per property value. Each remaining slot takes the row's
    highest-probability entity of that type (ties to the lowest index);
    a mandatory type with no extracted entities suppresses the tuple."""
    if not params.flags.enable_allocation:
        return _cartesian(entities)
    anchors = list(entities.get(EntityType.PROPERTY_VALUE, ()))
    out: list[ScoredTuple] = []
    for i, anchor in enumerate(anchors):
        chosen: dict[EntityType, EntitySpan | None] = {}
        probs: list[float] = []
        suppressed = False
        for etype in SLOT_TYPES:
            found = list(entities.get(etype, ()))
            if not found:
                if etype in MANDATORY_TYPES:
                    logger.warning(
                        "no %s extracted; suppressing tuple for anchor %r",
                        etype.value,
                        anchor.text,
                    )
                    suppressed = True
                    break
                chosen[etype] = None
                continue
            matrix = matrices[etype]
            if matrix.probs.shape != (len(anchors), len(found)):
                raise ValueError(
                    f"match matrix for {etype.value} has shape {matrix.probs.shape}, "
                    f"expected {(len(anchors), len(found))}"
                )
            row = matrix.probs[i]
            j = int(np.argmax(row))
            chosen[etype] = found[j]
            probs.append(float(row[j]))
        if suppressed:
            continue
        if chosen[EntityType.CONDITION_VALUE] is not None and chosen[EntityType.CONDITION] is None:
            # The schema forbids a condition value without a condition.
            logger.warning(
                "condition value without any condition entity; dropping it for anchor %r",
                anchor.text,
            )
            chosen[EntityType.CONDITION_VALUE] = None
        record = TupleRecord(
            material=chosen[EntityType.MATERIAL],
            property=chosen[EntityType.PROPERTY],
            property_value=anchor,
            condition=chosen[EntityType.CONDITION],
            condition_value=chosen[EntityType.CONDITION_VALUE],
        )
        out.append(ScoredTuple(record, float(np.mean(probs)) if probs else 1.0))
    return out
