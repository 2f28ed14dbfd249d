"""Two-stage tuple extraction for materials science text.

Stage one finds entity spans with per-type start/end pointer heads over
frozen token embeddings; stage two allocates the spans into
(material, property, property value[, condition, condition value])
tuples with an attention-based match scorer.
"""

from .allocator import (
    AllocFlags,
    AllocParams,
    MatcherTrainConfig,
    ScoredTuple,
    apply_diagonal_boost,
    assemble_tuples,
    score_matrix,
    train_matcher,
)
from .corpus import (
    AnnotatedSentence,
    CorpusError,
    Dataset,
    EntitySpan,
    EntityType,
    TupleRecord,
    parse_dataset,
    serialize_dataset,
    split_by_tuple_count,
    stats,
    train_val_split,
)
from .embedding import (
    AlignmentError,
    FormatError,
    align_span,
    read_embeddings,
    synthetic_embed,
    tokenize,
    write_embeddings,
)
from .metrics import MatchCounts, MetricTriple, f1_score, prf, tuple_match_counts
from .pipeline import (
    Predictions,
    evaluate_predictions,
    extract_dataset,
    extract_sentence,
    parse_predictions,
    select_dataset,
    serialize_predictions,
)
from .pointer_net import (
    ExtractorTrainConfig,
    PointerHeadParams,
    decode_spans,
    score_pointers,
    threshold_labels,
    train_extractor,
)
from .synthgen import SynthConfig, build_vocab, generate

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "AllocFlags",
    "AllocParams",
    "AnnotatedSentence",
    "CorpusError",
    "Dataset",
    "EntitySpan",
    "EntityType",
    "ExtractorTrainConfig",
    "FormatError",
    "MatchCounts",
    "MatcherTrainConfig",
    "MetricTriple",
    "PointerHeadParams",
    "Predictions",
    "ScoredTuple",
    "SynthConfig",
    "TupleRecord",
    "align_span",
    "apply_diagonal_boost",
    "assemble_tuples",
    "build_vocab",
    "decode_spans",
    "evaluate_predictions",
    "extract_dataset",
    "extract_sentence",
    "f1_score",
    "generate",
    "parse_dataset",
    "parse_predictions",
    "prf",
    "read_embeddings",
    "score_matrix",
    "score_pointers",
    "select_dataset",
    "serialize_dataset",
    "serialize_predictions",
    "split_by_tuple_count",
    "stats",
    "synthetic_embed",
    "threshold_labels",
    "tokenize",
    "train_extractor",
    "train_matcher",
    "train_val_split",
    "tuple_match_counts",
    "write_embeddings",
]
