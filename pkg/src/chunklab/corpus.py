"""BEIR-layout corpus, query, and qrels loading, validation, and subsetting.

Expected file layout (all UTF-8):
  corpus.jsonl   one JSON object per line: {"_id": ..., "title": ..., "text": ...}
  queries.jsonl  one JSON object per line: {"_id": ..., "text": ...}
  qrels/*.tsv    query-id<TAB>corpus-id<TAB>score, optional header row
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    text: str


@dataclass(frozen=True)
class Query:
    id: str
    text: str


@dataclass(frozen=True)
class QrelSet:
    """Graded relevance judgments keyed by (query_id, doc_id), grades >= 0."""

    judgments: dict[tuple[str, str], int] = field(default_factory=dict)

    def for_query(self, query_id: str) -> dict[str, int]:
        return {d: g for (q, d), g in self.judgments.items() if q == query_id}

    def query_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for q, _ in self.judgments:
            seen.setdefault(q)
        return list(seen)

    def restrict_to_docs(self, doc_ids: Iterable[str]) -> "QrelSet":
        """Drop judgments whose document is not in ``doc_ids``."""
        keep = set(doc_ids)
        return QrelSet({(q, d): g for (q, d), g in self.judgments.items() if d in keep})

    def __len__(self) -> int:
        return len(self.judgments)


@dataclass(frozen=True)
class CorpusSubset:
    """Deterministic corpus subsampling: keep ceil(fraction * N) documents.

    ``method`` is "shuffle" (seeded Fisher-Yates, then prefix take) or
    "prefix" (first documents in file order; seed unused).
    """

    fraction: float
    seed: int = 0
    method: str = "shuffle"

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise ValidationError(f"subset fraction must be in (0, 1], got {self.fraction}")
        if self.method not in ("shuffle", "prefix"):
            raise ValidationError(f"unknown subset method {self.method!r}")


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}:{line_no}: invalid JSON: {e.msg}") from e
            if not isinstance(record, dict):
                raise ParseError(f"{path}:{line_no}: expected a JSON object")
            yield line_no, record


def load_corpus(path: str | Path) -> list[Document]:
    """Load corpus.jsonl in file order; duplicate or empty ids and empty texts are rejected."""
    docs: list[Document] = []
    seen: set[str] = set()
    for line_no, rec in _iter_jsonl(path):
        if "_id" not in rec:
            raise ParseError(f"{path}:{line_no}: missing '_id' field")
        doc_id = str(rec["_id"])
        if not doc_id:
            raise ValidationError(f"{path}:{line_no}: empty document id")
        if doc_id in seen:
            raise ValidationError(f"{path}:{line_no}: duplicate document id {doc_id!r}")
        text = str(rec.get("text", ""))
        if not text:
            raise ValidationError(f"{path}:{line_no}: document {doc_id!r} has empty text")
        seen.add(doc_id)
        docs.append(Document(id=doc_id, title=str(rec.get("title", "")), text=text))
    return docs


def load_queries(path: str | Path) -> list[Query]:
    """Load queries.jsonl in file order; ids must be unique, texts non-empty."""
    queries: list[Query] = []
    seen: set[str] = set()
    for line_no, rec in _iter_jsonl(path):
        if "_id" not in rec:
            raise ParseError(f"{path}:{line_no}: missing '_id' field")
        query_id = str(rec["_id"])
        if not query_id:
            raise ValidationError(f"{path}:{line_no}: empty query id")
        if query_id in seen:
            raise ValidationError(f"{path}:{line_no}: duplicate query id {query_id!r}")
        text = str(rec.get("text", ""))
        if not text:
            raise ValidationError(f"{path}:{line_no}: query {query_id!r} has empty text")
        seen.add(query_id)
        queries.append(Query(id=query_id, text=text))
    return queries


def load_qrels(path: str | Path) -> QrelSet:
    """Load a TSV qrels file.

    Rows are ``query-id<TAB>corpus-id<TAB>score``. A leading header row
    (recognised by its non-integer score field) is skipped.
    """
    judgments: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(
                    f"{path}:{line_no}: expected 3 tab-separated columns, got {len(parts)}"
                )
            qid, doc_id, score_str = (p.strip() for p in parts)
            try:
                score = int(score_str)
            except ValueError:
                if line_no == 1:  # header row
                    continue
                raise ParseError(
                    f"{path}:{line_no}: non-integer relevance score {score_str!r}"
                ) from None
            if score < 0:
                raise ValidationError(f"{path}:{line_no}: negative relevance score {score}")
            if not qid or not doc_id:
                raise ValidationError(f"{path}:{line_no}: empty query or document id")
            key = (qid, doc_id)
            if key in judgments:
                raise ValidationError(f"{path}:{line_no}: duplicate judgment for {key}")
            judgments[key] = score
    return QrelSet(judgments)


def save_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps({"_id": doc.id, "title": doc.title, "text": doc.text},
                               ensure_ascii=False) + "\n")


def save_queries(queries: Iterable[Query], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for query in queries:
            f.write(json.dumps({"_id": query.id, "text": query.text}, ensure_ascii=False) + "\n")


def save_qrels(qrels: QrelSet, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write("query-id\tcorpus-id\tscore\n")
        for (qid, doc_id), grade in qrels.judgments.items():
            f.write(f"{qid}\t{doc_id}\t{grade}\n")


def subset_corpus(
    docs: list[Document], qrels: QrelSet, cfg: CorpusSubset
) -> tuple[list[Document], QrelSet]:
    """Keep ceil(fraction * N) documents, deterministically for a fixed seed.

    Selected documents are returned in their original corpus order, so
    fraction=1.0 is the identity. Judgments pointing at dropped documents
    are removed from the returned QrelSet.
    """
    n = len(docs)
    keep = math.ceil(cfg.fraction * n)
    if keep >= n:
        return list(docs), QrelSet(dict(qrels.judgments))

    if cfg.method == "prefix":
        chosen = list(range(keep))
    else:
        indices = list(range(n))
        rng = random.Random(cfg.seed)
        for i in range(n - 1, 0, -1):  # Fisher-Yates
            j = rng.randrange(i + 1)
            indices[i], indices[j] = indices[j], indices[i]
        chosen = sorted(indices[:keep])

    subset = [docs[i] for i in chosen]
    return subset, qrels.restrict_to_docs(d.id for d in subset)
