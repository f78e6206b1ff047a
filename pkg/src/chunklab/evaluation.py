"""Rank-quality metrics over document-level rankings against qrels.

NDCG uses linear gain with a log2(i+1) discount; MAP normalizes by
min(R, k); F1 is the harmonic mean of precision@k and recall. NDCG uses
the full relevance grades, while MAP and F1 treat a document as relevant
when its grade reaches the configured threshold (default 1). Queries with
no relevant document at all are excluded from the means and counted in a
skipped-query tally, mirroring what corpus subsetting does to labels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

from .corpus import QrelSet
from .errors import ValidationError
from .retrieval import RankedList

METRIC_NAMES = ("ndcg", "map", "f1")


@dataclass(frozen=True)
class CutoffSet:
    ks: tuple[int, ...] = (5, 10)

    def __post_init__(self):
        if not self.ks:
            raise ValidationError("at least one cutoff required")
        if any(k < 1 for k in self.ks):
            raise ValidationError(f"cutoffs must be positive, got {self.ks}")
        if list(self.ks) != sorted(self.ks):
            raise ValidationError(f"cutoffs must be sorted, got {self.ks}")


@dataclass
class MetricsReport:
    """Mean metric values for one experiment configuration."""

    config_label: str
    per_metric: dict[str, float]
    query_count: int
    skipped_queries: int = 0
    relevance_threshold: int = 1
    degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "config_label": self.config_label,
            "per_metric": dict(sorted(self.per_metric.items())),
            "query_count": self.query_count,
            "skipped_queries": self.skipped_queries,
            "relevance_threshold": self.relevance_threshold,
            "degraded": self.degraded,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetricsReport":
        return cls(
            config_label=data["config_label"],
            per_metric=dict(data["per_metric"]),
            query_count=int(data["query_count"]),
            skipped_queries=int(data.get("skipped_queries", 0)),
            relevance_threshold=int(data.get("relevance_threshold", 1)),
            degraded=bool(data.get("degraded", False)),
        )


def _dcg(gains: list[float]) -> float:
    return sum(g / math.log2(i + 2) for i, g in enumerate(gains))


def ndcg_at_k(ranking: RankedList, qrels_for_query: Mapping[str, int], k: int) -> float:
    """Graded NDCG@k: DCG over the top k divided by the ideal DCG."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    gains = [float(qrels_for_query.get(doc_id, 0)) for doc_id, _ in ranking.items[:k]]
    ideal = sorted((float(g) for g in qrels_for_query.values()), reverse=True)[:k]
    idcg = _dcg(ideal)
    if idcg == 0.0:
        return 0.0
    return _dcg(gains) / idcg


def map_at_k(
    ranking: RankedList, qrels_for_query: Mapping[str, int], k: int, threshold: int = 1
) -> float:
    """Cut-off average precision: mean precision at each relevant hit, over min(R, k)."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    relevant = {d for d, g in qrels_for_query.items() if g >= threshold}
    if not relevant:
        return 0.0
    hits = 0
    precision_sum = 0.0
    for i, (doc_id, _) in enumerate(ranking.items[:k], start=1):
        if doc_id in relevant:
            hits += 1
            precision_sum += hits / i
    return precision_sum / min(len(relevant), k)


def f1_at_k(
    ranking: RankedList, qrels_for_query: Mapping[str, int], k: int, threshold: int = 1
) -> float:
    """Harmonic mean of precision@k and recall; 0 when nothing relevant is retrieved."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    relevant = {d for d, g in qrels_for_query.items() if g >= threshold}
    if not relevant:
        return 0.0
    hits = sum(1 for doc_id, _ in ranking.items[:k] if doc_id in relevant)
    if hits == 0:
        return 0.0
    precision = hits / k
    recall = hits / len(relevant)
    return 2.0 * precision * recall / (precision + recall)


def evaluate_run(
    rankings: Mapping[str, RankedList],
    qrels: QrelSet,
    cutoffs: CutoffSet = CutoffSet(),
    relevance_threshold: int = 1,
    config_label: str = "",
) -> MetricsReport:
    """Mean NDCG/MAP/F1 at each cutoff over queries with >= 1 relevant document."""
    if not rankings:
        raise ValidationError("no rankings to evaluate")
    per_query: dict[str, dict[str, int]] = {}
    for query_id in rankings:
        per_query[query_id] = qrels.for_query(query_id)

    sums = {f"{m}@{k}": 0.0 for m in METRIC_NAMES for k in cutoffs.ks}
    evaluated = 0
    skipped = 0
    degraded = False
    for query_id, ranking in rankings.items():
        judgments = per_query[query_id]
        degraded = degraded or ranking.degraded
        if not any(g >= relevance_threshold for g in judgments.values()):
            skipped += 1
            continue
        evaluated += 1
        for k in cutoffs.ks:
            sums[f"ndcg@{k}"] += ndcg_at_k(ranking, judgments, k)
            sums[f"map@{k}"] += map_at_k(ranking, judgments, k, threshold=relevance_threshold)
            sums[f"f1@{k}"] += f1_at_k(ranking, judgments, k, threshold=relevance_threshold)

    per_metric = {
        name: (total / evaluated if evaluated else 0.0) for name, total in sums.items()
    }
    return MetricsReport(
        config_label=config_label,
        per_metric=per_metric,
        query_count=evaluated,
        skipped_queries=skipped,
        relevance_threshold=relevance_threshold,
        degraded=degraded,
    )


def render_table(reports: list[MetricsReport], cutoffs: CutoffSet = CutoffSet()) -> str:
    """Aligned text table: one row per configuration, metric columns per cutoff."""
    columns = [f"{m.upper()}@{k}" for k in cutoffs.ks for m in METRIC_NAMES]
    label_width = max([len("config")] + [len(r.config_label) for r in reports])
    header = "config".ljust(label_width) + "  " + "  ".join(c.rjust(8) for c in columns)
    lines = [header, "-" * len(header)]
    for report in reports:
        cells = []
        for k in cutoffs.ks:
            for m in METRIC_NAMES:
                value = report.per_metric.get(f"{m}@{k}")
                cells.append(f"{value:.3f}".rjust(8) if value is not None else " " * 8)
        row = report.config_label.ljust(label_width) + "  " + "  ".join(cells)
        if report.degraded:
            row += "  (degraded)"
        lines.append(row)
    return "\n".join(lines)
