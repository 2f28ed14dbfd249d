"""Frozen per-token embeddings: binary interchange format, a deterministic
hash embedder for self-contained runs, and span-to-token alignment.

TUPX file layout, all integers little-endian u32, vectors little-endian
f32: magic "TUPX", version, sentence count, then per sentence: id length,
id bytes (UTF-8), token count, dimension, and per token char_start,
char_end, dim floats. Character offsets count Unicode code points.
"""

from __future__ import annotations

import hashlib
import re
import struct
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from .corpus import AnnotatedSentence, EntitySpan

TUPX_MAGIC = b"TUPX"
TUPX_VERSION = 1
MIN_SYNTHETIC_DIM = 8

# Decimals stay whole tokens; otherwise word runs and single punctuation marks.
_TOKEN_RE = re.compile(r"\d+\.\d+|\w+|[^\w\s]")


class FormatError(ValueError):
    """An embedding file violates the TUPX layout or its invariants."""


class AlignmentError(ValueError):
    """A character span does not cover any token."""


@dataclass(frozen=True)
class TokenizedSentence:
    sentence_id: str
    tokens: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple((int(s), int(e)) for s, e in self.tokens))
        prev_end = 0
        for start, end in self.tokens:
            if start < 0 or end <= start:
                raise FormatError(
                    f"sentence {self.sentence_id}: bad token offsets [{start}, {end})"
                )
            if start < prev_end:
                raise FormatError(
                    f"sentence {self.sentence_id}: tokens overlap or are out of order"
                )
            prev_end = end


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    sentence_id: str
    vectors: np.ndarray  # (n_tokens, dim) float32

    def __post_init__(self) -> None:
        v = np.asarray(self.vectors, dtype=np.float32)
        if v.ndim != 2:
            raise FormatError(f"sentence {self.sentence_id}: vectors must be 2-D")
        if not np.all(np.isfinite(v)):
            raise FormatError(f"sentence {self.sentence_id}: non-finite embedding value")
        object.__setattr__(self, "vectors", v)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


EmbeddedSentence = tuple[TokenizedSentence, EmbeddingRecord]


def tokenize(text: str) -> tuple[tuple[int, int], ...]:
    return tuple(m.span() for m in _TOKEN_RE.finditer(text))


def write_embeddings(records: Sequence[EmbeddedSentence], sink: BinaryIO) -> int:
    """Write records to a TUPX stream; returns the byte count."""
    dims = {rec.dim for _, rec in records}
    if len(dims) > 1:
        raise FormatError(f"inconsistent dimensions in one file: {sorted(dims)}")
    written = 0

    def put(chunk: bytes) -> None:
        nonlocal written
        sink.write(chunk)
        written += len(chunk)

    put(TUPX_MAGIC)
    put(struct.pack("<II", TUPX_VERSION, len(records)))
    for tok, rec in records:
        if tok.sentence_id != rec.sentence_id:
            raise FormatError(
                f"token/embedding id mismatch: {tok.sentence_id} vs {rec.sentence_id}"
            )
        if len(tok.tokens) != rec.vectors.shape[0]:
            raise FormatError(
                f"sentence {tok.sentence_id}: {len(tok.tokens)} tokens but "
                f"{rec.vectors.shape[0]} vectors"
            )
        ident = tok.sentence_id.encode("utf-8")
        put(struct.pack("<I", len(ident)))
        put(ident)
        put(struct.pack("<II", len(tok.tokens), rec.dim))
        vecs = np.ascontiguousarray(rec.vectors, dtype="<f4")
        for (start, end), vec in zip(tok.tokens, vecs):
            put(struct.pack("<II", start, end))
            put(vec.tobytes())
    return written


def read_embeddings(source: BinaryIO) -> list[EmbeddedSentence]:
    """Read and fully validate a TUPX stream."""

    def take(n: int, what: str) -> bytes:
        chunk = source.read(n)
        if len(chunk) != n:
            raise FormatError(f"truncated file while reading {what}")
        return chunk

    if take(4, "magic") != TUPX_MAGIC:
        raise FormatError("bad magic, not a TUPX file")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != TUPX_VERSION:
        raise FormatError(f"unsupported version {version}")

    out: list[EmbeddedSentence] = []
    seen_ids: set[str] = set()
    file_dim: int | None = None
    for i in range(count):
        (id_len,) = struct.unpack("<I", take(4, f"sentence {i} id length"))
        try:
            sid = take(id_len, f"sentence {i} id").decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"sentence {i}: id is not valid UTF-8: {e}") from None
        if sid in seen_ids:
            raise FormatError(f"duplicate sentence id {sid}")
        seen_ids.add(sid)
        n_tokens, dim = struct.unpack("<II", take(8, f"sentence {sid} counts"))
        if dim < 1:
            raise FormatError(f"sentence {sid}: dimension must be positive")
        if file_dim is None:
            file_dim = dim
        elif dim != file_dim:
            raise FormatError(
                f"sentence {sid}: dimension {dim} differs from earlier {file_dim}"
            )
        offsets = []
        vectors = np.empty((n_tokens, dim), dtype=np.float32)
        for t in range(n_tokens):
            start, end = struct.unpack("<II", take(8, f"sentence {sid} token {t} offsets"))
            offsets.append((start, end))
            vec = take(4 * dim, f"sentence {sid} token {t} vector")
            vectors[t] = np.frombuffer(vec, dtype="<f4")
        out.append((TokenizedSentence(sid, tuple(offsets)), EmbeddingRecord(sid, vectors)))
    if source.read(1) != b"":
        raise FormatError("trailing bytes after the last sentence")
    return out


def _token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}\x1f{token}".encode(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.uniform(-1.0, 1.0, dim).astype(np.float32)


def synthetic_embed(sentence: AnnotatedSentence, dim: int, seed: int) -> EmbeddedSentence:
    """Hash-based stand-in embedder. Identical surface tokens get identical
    vectors; different seeds give unrelated vectors."""
    if dim < MIN_SYNTHETIC_DIM:
        raise FormatError(f"synthetic dimension must be at least {MIN_SYNTHETIC_DIM}")
    offsets = tokenize(sentence.text)
    cache: dict[str, np.ndarray] = {}
    vectors = np.empty((len(offsets), dim), dtype=np.float32)
    for i, (start, end) in enumerate(offsets):
        token = sentence.text[start:end]
        if token not in cache:
            cache[token] = _token_vector(token, dim, seed)
        vectors[i] = cache[token]
    return TokenizedSentence(sentence.id, offsets), EmbeddingRecord(sentence.id, vectors)


def align_span(span: EntitySpan, tok: TokenizedSentence) -> tuple[int, int]:
    """Minimal token cover of a character span: the first token ending after
    span.start through the last token starting before span.end."""
    starts = [s for s, _ in tok.tokens]
    ends = [e for _, e in tok.tokens]
    i = bisect_right(ends, span.start)
    j = bisect_left(starts, span.end) - 1
    if i >= len(tok.tokens) or j < 0 or i > j:
        raise AlignmentError(
            f"sentence {tok.sentence_id}: span [{span.start}, {span.end}) covers no token"
        )
    return i, j
