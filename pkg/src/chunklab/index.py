"""Sparse (Okapi BM25) and dense (exact cosine) indexes over chunk records.

BM25 follows the standard Okapi form with a +1-inside-log idf that is
always non-negative:

    score(q, r) = sum over query terms t of
        idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len/avgdl))
    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))

Each occurrence of a term in the query contributes one summand. The dense
index is exact brute-force cosine over unit rows (dot product); no ANN.
Ties everywhere break by ascending chunk id string for cross-platform
determinism.
"""

from __future__ import annotations

import json
import logging
import math
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import ChunkEmbedding
from .errors import ParseError, ValidationError
from .segmenter import Chunk

logger = logging.getLogger(__name__)

ChunkKey = tuple[str, int]

_WORD_RE = re.compile(r"[^\W_]+")  # unicode letters/digits, underscores excluded

SNAPSHOT_MAGIC = b"CLIX"
SNAPSHOT_VERSION = 1


def chunk_id(key: ChunkKey) -> str:
    return f"{key[0]}#{key[1]}"


def parse_chunk_id(cid: str) -> ChunkKey:
    doc_id, _, index = cid.rpartition("#")
    return doc_id, int(index)


def tokenize(text: str, stopwords: frozenset[str] = frozenset(), s_stem: bool = False) -> list[str]:
    """Lowercase and split on non-alphanumeric runs.

    Optional extras, both off by default: a stopword list, and the
    three-rule "S" plural stemmer (-ies > -y, -es > -e, -s dropped).
    """
    tokens = _WORD_RE.findall(text.lower())
    if stopwords:
        tokens = [t for t in tokens if t not in stopwords]
    if s_stem:
        tokens = [_s_stem(t) for t in tokens]
    return tokens


def _s_stem(token: str) -> str:
    if len(token) > 4 and token.endswith("ies") and not token.endswith(("eies", "aies")):
        return token[:-3] + "y"
    if len(token) > 3 and token.endswith("es") and not token.endswith(("aes", "ees", "oes")):
        return token[:-1]
    if len(token) > 2 and token.endswith("s") and not token.endswith(("us", "ss")):
        return token[:-1]
    return token


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValidationError(f"k1 must be >= 0, got {self.k1}")
        if not (0.0 <= self.b <= 1.0):
            raise ValidationError(f"b must be in [0, 1], got {self.b}")


@dataclass
class ChunkRecord:
    """A chunk as indexed: dense vector plus sparse term statistics.

    Terms come from the chunk's effective text, i.e. context + separator +
    chunk text when a generated context is present.
    """

    key: ChunkKey
    dense: ChunkEmbedding
    terms: Counter
    length: int  # token count of the indexed text

    @classmethod
    def from_chunk(cls, chunk: Chunk, dense: ChunkEmbedding,
                   stopwords: frozenset[str] = frozenset(),
                   s_stem: bool = False) -> "ChunkRecord":
        tokens = tokenize(chunk.effective_text, stopwords=stopwords, s_stem=s_stem)
        return cls(
            key=(chunk.span.doc_id, chunk.span.index),
            dense=dense,
            terms=Counter(tokens),
            length=len(tokens),
        )


@dataclass
class Bm25Index:
    postings: dict[str, list[tuple[ChunkKey, int]]] = field(default_factory=dict)
    doc_lengths: dict[ChunkKey, int] = field(default_factory=dict)
    n_records: int = 0
    avgdl: float = 0.0


@dataclass
class DenseIndex:
    keys: list[ChunkKey] = field(default_factory=list)
    matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))


def build_indexes(
    records: list[ChunkRecord], params: Bm25Params | None = None
) -> tuple[Bm25Index, DenseIndex]:
    """Populate both indexes over one record set; duplicate keys are rejected.

    Records whose dense vector is the zero sentinel stay in the sparse index
    but are excluded from the dense index.
    """
    seen: set[ChunkKey] = set()
    for record in records:
        if record.key in seen:
            raise ValidationError(f"duplicate chunk key {record.key}")
        seen.add(record.key)

    sparse = Bm25Index()
    for record in records:
        sparse.doc_lengths[record.key] = record.length
        for term, tf in record.terms.items():
            sparse.postings.setdefault(term, []).append((record.key, tf))
    sparse.n_records = len(records)
    if records:
        sparse.avgdl = sum(sparse.doc_lengths.values()) / len(records)

    dense_keys = []
    rows = []
    for record in records:
        if record.dense.is_zero:
            logger.warning("record %s has a zero dense vector; excluded from dense index",
                           chunk_id(record.key))
            continue
        dense_keys.append(record.key)
        rows.append(np.asarray(record.dense.vector, dtype=np.float64))
    matrix = np.vstack(rows) if rows else np.zeros((0, 0))
    return sparse, DenseIndex(keys=dense_keys, matrix=matrix)


def bm25_score(
    index: Bm25Index, params: Bm25Params, query_terms: list[str]
) -> list[tuple[ChunkKey, float]]:
    """Score records containing at least one query term, best first.

    Empty indexes and queries that tokenize to nothing yield an empty list.
    """
    if index.n_records == 0:
        return []
    if not query_terms:
        logger.warning("empty query after tokenization")
        return []
    scores: dict[ChunkKey, float] = {}
    for term in query_terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        df = len(plist)
        idf = math.log(1.0 + (index.n_records - df + 0.5) / (df + 0.5))
        for key, tf in plist:
            length_norm = 1.0 - params.b + params.b * index.doc_lengths[key] / index.avgdl
            contribution = idf * tf * (params.k1 + 1.0) / (tf + params.k1 * length_norm)
            scores[key] = scores.get(key, 0.0) + contribution
    return sorted(scores.items(), key=lambda kv: (-kv[1], chunk_id(kv[0])))


def dense_search(
    index: DenseIndex, query_vector: np.ndarray, depth: int
) -> list[tuple[ChunkKey, float]]:
    """Exact top-`depth` by dot product (cosine over unit vectors).

    Scores come from one dot product per row, not a single matrix-vector
    product: BLAS gemv kernels can round identical rows differently
    depending on their position, which would corrupt tie-by-key ordering.
    """
    if depth < 1:
        raise ValidationError(f"depth must be >= 1, got {depth}")
    if not index.keys:
        return []
    norm = float(np.linalg.norm(query_vector))
    if abs(norm - 1.0) > 1e-4:
        raise ValidationError(f"query vector must be unit-norm, got norm {norm:.6f}")
    query = np.asarray(query_vector, dtype=np.float64)
    scores = [float(np.dot(index.matrix[i], query)) for i in range(len(index.keys))]
    order = sorted(range(len(index.keys)),
                   key=lambda i: (-scores[i], chunk_id(index.keys[i])))
    return [(index.keys[i], scores[i]) for i in order[:depth]]


def save_snapshot(path: str | Path, sparse: Bm25Index, dense: DenseIndex,
                  params: Bm25Params) -> None:
    """Write both indexes as one versioned binary snapshot.

    Layout: magic "CLIX", u32 version, u64 header length, UTF-8 JSON header
    (params, keys, postings, lengths, dense row map), then the dense matrix
    as float32 rows. Chunk vectors are float32-valued by construction, so
    the round trip is lossless.
    """
    key_list = list(sparse.doc_lengths)
    key_pos = {key: i for i, key in enumerate(key_list)}
    header = {
        "k1": params.k1,
        "b": params.b,
        "n_records": sparse.n_records,
        "avgdl": sparse.avgdl,
        "keys": [[doc_id, index] for doc_id, index in key_list],
        "lengths": [sparse.doc_lengths[k] for k in key_list],
        "postings": {
            term: [[key_pos[key], tf] for key, tf in plist]
            for term, plist in sparse.postings.items()
        },
        "dense_keys": [key_pos[k] for k in dense.keys],
        "dim": int(dense.matrix.shape[1]) if dense.matrix.size else 0,
    }
    blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as f:
        f.write(SNAPSHOT_MAGIC)
        f.write(struct.pack("<IQ", SNAPSHOT_VERSION, len(blob)))
        f.write(blob)
        if dense.matrix.size:
            f.write(np.ascontiguousarray(dense.matrix, dtype=np.float32).tobytes())


def load_snapshot(path: str | Path) -> tuple[Bm25Index, DenseIndex, Bm25Params]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise ParseError(f"{path}: not an index snapshot (bad magic {magic!r})")
        version, blob_len = struct.unpack("<IQ", f.read(12))
        if version != SNAPSHOT_VERSION:
            raise ParseError(f"{path}: unsupported snapshot version {version}")
        header = json.loads(f.read(blob_len).decode("utf-8"))
        keys = [(doc_id, int(index)) for doc_id, index in header["keys"]]
        sparse = Bm25Index(
            postings={
                term: [(keys[pos], tf) for pos, tf in plist]
                for term, plist in header["postings"].items()
            },
            doc_lengths=dict(zip(keys, header["lengths"])),
            n_records=header["n_records"],
            avgdl=header["avgdl"],
        )
        dense_keys = [keys[pos] for pos in header["dense_keys"]]
        dim = header["dim"]
        raw = f.read(len(dense_keys) * dim * 4)
        matrix = (
            np.frombuffer(raw, dtype=np.float32).reshape(len(dense_keys), dim).astype(np.float64)
            if dense_keys
            else np.zeros((0, 0))
        )
        params = Bm25Params(k1=header["k1"], b=header["b"])
    return sparse, DenseIndex(keys=dense_keys, matrix=matrix), params
