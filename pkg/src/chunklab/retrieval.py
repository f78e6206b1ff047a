"""The two retrieval methods and chunk-to-document score aggregation.

Traditional retrieval (TR) is dense-only. Rank fusion with reranking (RFR)
min-max normalizes the dense and sparse candidate lists per query, combines
them with a weighted sum (default weights 1 and 0.25, a 4:1 ratio), and
hands the fused candidates to a cross-encoder-style reranker. A document's
score is the maximum over its chunks' scores.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ProviderError, ValidationError
from .index import DenseIndex, chunk_id, dense_search, parse_chunk_id, tokenize

logger = logging.getLogger(__name__)

CHUNK_LEVEL = "chunk_level"
DOC_LEVEL = "doc_level"

METHOD_TRADITIONAL = "TR"
METHOD_RANK_FUSION_RERANK = "RFR"


@dataclass
class RankedList:
    """Scored ids in non-increasing score order; ids unique within the list."""

    items: list[tuple[str, float]]
    kind: str = CHUNK_LEVEL
    degraded: bool = False

    def ids(self) -> list[str]:
        return [item_id for item_id, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class FusionConfig:
    dense_weight: float = 1.0
    sparse_weight: float = 0.25
    candidate_depth: int = 50
    normalization: str = "min_max"  # or "none"

    def __post_init__(self):
        if self.dense_weight < 0 or self.sparse_weight < 0:
            raise ValidationError("fusion weights must be >= 0")
        if self.dense_weight == 0 and self.sparse_weight == 0:
            raise ValidationError("at least one fusion weight must be positive")
        if self.candidate_depth < 1:
            raise ValidationError("candidate_depth must be >= 1")
        if self.normalization not in ("min_max", "none"):
            raise ValidationError(f"unknown normalization {self.normalization!r}")


@dataclass
class RerankRequest:
    query_text: str
    candidates: list[tuple[str, str]]  # (chunk id, text as presented to the scorer)
    depth: int


class RerankProvider(Protocol):
    def score(self, query: str, documents: list[str]) -> list[float]: ...


class OverlapReranker:
    """Deterministic stand-in for a cross-encoder.

    Scores a candidate by the fraction of distinct query terms it contains,
    using the same tokenizer as the sparse index.
    """

    name = "overlap-reranker"

    def score(self, query: str, documents: list[str]) -> list[float]:
        query_terms = set(tokenize(query))
        if not query_terms:
            return [0.0] * len(documents)
        return [
            len(query_terms & set(tokenize(doc))) / len(query_terms) for doc in documents
        ]


def retrieve_traditional(
    dense_index: DenseIndex, query_vector: np.ndarray, depth: int
) -> RankedList:
    """Dense-only retrieval: dense_search output wrapped as a chunk-level list."""
    hits = dense_search(dense_index, query_vector, depth)
    return RankedList(items=[(chunk_id(key), score) for key, score in hits], kind=CHUNK_LEVEL)


def _min_max(items: list[tuple[str, float]]) -> dict[str, float]:
    # Constant lists (including singletons) map to 1.0 so their candidates
    # still contribute their full weight.
    if not items:
        return {}
    scores = [s for _, s in items]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return {item_id: 1.0 for item_id, _ in items}
    return {item_id: (s - lo) / (hi - lo) for item_id, s in items}


def fuse(dense: RankedList, sparse: RankedList, cfg: FusionConfig) -> RankedList:
    """Weighted sum of per-list normalized scores over the candidate union.

    A candidate absent from one list contributes 0 from it. Output is
    descending with ties broken by id, truncated to candidate_depth.
    """
    if dense.kind != CHUNK_LEVEL or sparse.kind != CHUNK_LEVEL:
        raise ValidationError("fuse expects chunk-level inputs")
    if cfg.normalization == "min_max":
        dense_scores = _min_max(dense.items)
        sparse_scores = _min_max(sparse.items)
    else:
        dense_scores = dict(dense.items)
        sparse_scores = dict(sparse.items)

    fused = {
        cid: cfg.dense_weight * dense_scores.get(cid, 0.0)
        + cfg.sparse_weight * sparse_scores.get(cid, 0.0)
        for cid in {*dense_scores, *sparse_scores}
    }
    ranked = sorted(fused.items(), key=lambda kv: (-kv[1], kv[0]))[: cfg.candidate_depth]
    return RankedList(items=ranked, kind=CHUNK_LEVEL)


def rerank(provider: RerankProvider, req: RerankRequest, retries: int = 2,
           backoff: float = 0.1) -> RankedList:
    """Rescore every candidate and reorder; fusion scores are discarded.

    The sort is stable, so candidates the provider scores equally keep
    their input order. If the provider keeps failing, the input ordering is
    returned with rank-derived scores and the degraded flag set.
    """
    if not req.candidates:
        raise ValidationError("rerank requires at least one candidate")
    texts = [text for _, text in req.candidates]
    attempt = 0
    while True:
        try:
            scores = provider.score(req.query_text, texts)
            break
        except ProviderError as e:
            if attempt >= retries or not e.retryable:
                logger.warning("reranker failed after %d attempts: %s", attempt + 1, e)
                n = len(req.candidates)
                fallback = [(cid, (n - i) / n) for i, (cid, _) in enumerate(req.candidates)]
                return RankedList(items=fallback[: req.depth], kind=CHUNK_LEVEL, degraded=True)
            time.sleep(backoff * (2 ** attempt))
            attempt += 1
    if len(scores) != len(req.candidates):
        raise ProviderError(
            f"reranker returned {len(scores)} scores for {len(req.candidates)} candidates",
            retryable=False,
        )
    paired = [(cid, float(s)) for (cid, _), s in zip(req.candidates, scores)]
    paired.sort(key=lambda kv: -kv[1])
    return RankedList(items=paired[: req.depth], kind=CHUNK_LEVEL)


def aggregate_to_documents(chunks: RankedList, top_k: int) -> RankedList:
    """Document score = max over its chunks' scores; ties break by doc id."""
    if chunks.kind != CHUNK_LEVEL:
        raise ValidationError("aggregate_to_documents expects a chunk-level list")
    best: dict[str, float] = {}
    for cid, score in chunks.items:
        doc_id, _ = parse_chunk_id(cid)
        if doc_id not in best or score > best[doc_id]:
            best[doc_id] = score
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    return RankedList(items=ranked, kind=DOC_LEVEL, degraded=chunks.degraded)
