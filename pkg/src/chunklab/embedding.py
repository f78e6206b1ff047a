"""Embedding providers and the early/late chunk pooling paths.

Early chunking embeds each chunk's text independently and mean-pools its
token vectors. Late chunking embeds the whole document once at token
level, assigns token vectors to chunk spans by token start offset, and
mean-pools per span, so every chunk vector carries document-wide context.

Token vectors are pooled raw and normalized once at the end. Emitted chunk
vectors are passed through float32 so values match the on-disk cache
exactly (see cache.py); all arithmetic stays in float64.
"""

from __future__ import annotations

import logging
import re
from bisect import bisect_right
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .corpus import Document
from .errors import ValidationError
from .segmenter import Chunk, ChunkSpan

logger = logging.getLogger(__name__)

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3

_TOKEN_RE = re.compile(r"\S+")


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash; fixed published constants keep bucket ids stable."""
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def whitespace_token_offsets(text: str) -> list[tuple[int, int]]:
    """Character (start, end) offsets of whitespace-delimited tokens."""
    return [(m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


@dataclass(frozen=True)
class EmbeddingProviderInfo:
    name: str
    dim: int
    max_tokens: int

    def __post_init__(self):
        if self.dim <= 0 or self.max_tokens <= 0:
            raise ValidationError("provider dim and max_tokens must be positive")


@dataclass
class TokenEmbeddingMatrix:
    """Per-token vectors with character offsets; rows are NOT normalized."""

    doc_id: str
    tokens: list[tuple[int, int]]
    vectors: np.ndarray  # (num_tokens, dim) float64
    truncated: bool = False

    def __post_init__(self):
        if self.vectors.shape[0] != len(self.tokens):
            raise ValidationError("token/vector row count mismatch")


@dataclass
class ChunkEmbedding:
    doc_id: str
    chunk_index: int
    vector: np.ndarray  # unit L2 norm, or the all-zeros sentinel

    @property
    def is_zero(self) -> bool:
        return not np.any(self.vector)


class TokenEmbedder(Protocol):
    """Protocol shared by the hash test embedder and remote providers."""

    def info(self) -> EmbeddingProviderInfo: ...

    def embed_tokens(self, text: str, doc_id: str = "") -> TokenEmbeddingMatrix: ...


@dataclass(frozen=True)
class HashEmbedderConfig:
    """Deterministic test embedder settings.

    alpha controls context mixing: each token vector is
    (1 - alpha) * e_h(token) + alpha * mean of e_h over all input tokens,
    where e_i is the one-hot basis vector at bucket i = fnv1a_64(token) % dim
    and tokens are lowercased whitespace runs. alpha=0 makes token vectors
    independent of their surroundings.
    """

    dim: int = 64
    alpha: float = 0.5
    max_tokens: int = 8192

    def __post_init__(self):
        if self.dim <= 0:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.max_tokens <= 0:
            raise ValidationError(f"max_tokens must be positive, got {self.max_tokens}")


class HashEmbedder:
    """Pure-function embedder: hashed one-hot buckets blended with the input mean.

    Deterministic for a fixed (text, config), so pipelines built on it are
    reproducible without any model download or network access.
    """

    def __init__(self, config: HashEmbedderConfig | None = None):
        self.config = config or HashEmbedderConfig()

    def info(self) -> EmbeddingProviderInfo:
        cfg = self.config
        return EmbeddingProviderInfo(
            name=f"hash-dim{cfg.dim}-alpha{cfg.alpha:g}", dim=cfg.dim, max_tokens=cfg.max_tokens
        )

    def bucket(self, token: str) -> int:
        return fnv1a_64(token.lower().encode("utf-8")) % self.config.dim

    def embed_tokens(self, text: str, doc_id: str = "") -> TokenEmbeddingMatrix:
        offsets = whitespace_token_offsets(text)
        if not offsets:
            raise ValidationError("degenerate input: text has no tokens")
        truncated = len(offsets) > self.config.max_tokens
        if truncated:
            logger.warning(
                "input of %d tokens truncated to provider limit %d",
                len(offsets), self.config.max_tokens,
            )
            offsets = offsets[: self.config.max_tokens]

        base = np.zeros((len(offsets), self.config.dim))
        for row, (s, e) in enumerate(offsets):
            base[row, self.bucket(text[s:e])] = 1.0
        alpha = self.config.alpha
        vectors = (1.0 - alpha) * base + alpha * base.mean(axis=0)
        return TokenEmbeddingMatrix(doc_id=doc_id, tokens=offsets, vectors=vectors,
                                    truncated=truncated)


def normalize(vector: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm; the zero vector maps to the zero sentinel."""
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        logger.warning("normalize() called on a zero vector; emitting zero sentinel")
        return np.zeros_like(vector, dtype=np.float64)
    return np.asarray(vector, dtype=np.float64) / norm


def is_zero_vector(vector: np.ndarray) -> bool:
    return not np.any(vector)


def _freeze(vector: np.ndarray) -> np.ndarray:
    # Round-trip through float32: the cache stores float32 rows, and cold and
    # warm runs must index bit-identical values.
    return vector.astype(np.float32).astype(np.float64)


def embed_chunk_early(provider: TokenEmbedder, chunk: Chunk) -> ChunkEmbedding:
    """Embed one chunk independently: mean of its token vectors, then normalize.

    Contextualized chunks are embedded over context + separator + text.
    A chunk whose text yields no tokens gets the zero sentinel and a warning.
    """
    try:
        matrix = provider.embed_tokens(chunk.effective_text)
    except ValidationError:
        logger.warning(
            "chunk %s#%d has no tokens; emitting zero sentinel",
            chunk.span.doc_id, chunk.span.index,
        )
        dim = provider.info().dim
        return ChunkEmbedding(chunk.span.doc_id, chunk.span.index, np.zeros(dim))
    vector = normalize(matrix.vectors.mean(axis=0))
    return ChunkEmbedding(chunk.span.doc_id, chunk.span.index, _freeze(vector))


def embed_chunks_late(
    provider: TokenEmbedder, doc: Document, spans: list[ChunkSpan]
) -> list[ChunkEmbedding]:
    """Embed the whole document once, then pool token vectors per chunk span.

    A token belongs to the span containing its start offset. Spans that
    capture zero tokens (including spans past the provider's truncation
    point) yield the zero-vector sentinel and a warning.
    """
    if not spans:
        return []
    matrix = provider.embed_tokens(doc.text, doc_id=doc.id)
    if matrix.truncated:
        logger.warning("document %s truncated during late-chunking embedding", doc.id)

    starts = [span.start for span in spans]
    assigned: list[list[int]] = [[] for _ in spans]
    for row, (tok_start, _) in enumerate(matrix.tokens):
        idx = bisect_right(starts, tok_start) - 1
        if idx >= 0 and tok_start < spans[idx].end:
            assigned[idx].append(row)

    embeddings = []
    for span, rows in zip(spans, assigned):
        if rows:
            vector = _freeze(normalize(matrix.vectors[rows].mean(axis=0)))
        else:
            logger.warning("span %s#%d captured no tokens; emitting zero sentinel",
                           span.doc_id, span.index)
            vector = np.zeros(matrix.vectors.shape[1])
        embeddings.append(ChunkEmbedding(span.doc_id, span.index, vector))
    return embeddings


def embed_text(provider: TokenEmbedder, text: str) -> np.ndarray:
    """Pooled unit vector for free-standing text (used for queries)."""
    matrix = provider.embed_tokens(text)
    return _freeze(normalize(matrix.vectors.mean(axis=0)))
