"""Experiment orchestration: config, pipeline stages, caching, and the grid.

A single experiment runs segment -> (contextualize) -> embed -> index ->
retrieve -> aggregate -> evaluate over one corpus. The grid crosses the
four chunking methods (fixed/semantic segmentation, with and without
contextualization: FUC, SUC, FCC, SCC) with the two retrieval methods
(TR, RFR). With the built-in deterministic providers the whole pipeline is
a pure function of (config, corpus), which the acceptance suite relies on.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import cache as cache_io
from .contextualizer import (ContextPrompt, LlmContextualizer, MockContextualizer,
                             contextualize)
from .corpus import (CorpusSubset, Document, Query, load_corpus, load_qrels,
                     load_queries, subset_corpus)
from .embedding import (ChunkEmbedding, HashEmbedder, HashEmbedderConfig, TokenEmbedder,
                        embed_chunk_early, embed_chunks_late, embed_text)
from .errors import ConfigError, ProviderError
from .evaluation import CutoffSet, MetricsReport, evaluate_run
from .index import Bm25Params, ChunkRecord, bm25_score, build_indexes, chunk_id, tokenize
from .retrieval import (METHOD_RANK_FUSION_RERANK, METHOD_TRADITIONAL, FusionConfig,
                        OverlapReranker, RankedList, RerankRequest, aggregate_to_documents,
                        fuse, rerank, retrieve_traditional)
from .remote import RemoteEmbedder, RemoteGenerator, RemoteReranker
from .segmenter import (FIXED_WINDOW, SEMANTIC, Chunk, SegmenterConfig, segment,
                        slice_chunks)

logger = logging.getLogger(__name__)

EARLY = "early"
LATE = "late"

CM_LABELS = {
    (FIXED_WINDOW, False): "FUC",
    (SEMANTIC, False): "SUC",
    (FIXED_WINDOW, True): "FCC",
    (SEMANTIC, True): "SCC",
}

ENV_EMBED_ENDPOINT = "CHUNKLAB_EMBED_ENDPOINT"
ENV_GENERATE_ENDPOINT = "CHUNKLAB_GENERATE_ENDPOINT"
ENV_RERANK_ENDPOINT = "CHUNKLAB_RERANK_ENDPOINT"


@dataclass
class ExperimentConfig:
    corpus_file: str
    queries_file: str
    qrels_file: str
    subset: CorpusSubset | None = None
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    chunking_mode: str = EARLY
    contextualize: bool = False
    context_prompt: ContextPrompt = field(default_factory=ContextPrompt)
    embedding_provider: dict = field(default_factory=lambda: {"name": "hash"})
    llm_provider: dict = field(default_factory=lambda: {"name": "mock"})
    rerank_provider: dict = field(default_factory=lambda: {"name": "overlap"})
    fusion: FusionConfig = field(default_factory=FusionConfig)
    bm25: Bm25Params = field(default_factory=Bm25Params)
    retrieval_method: str = METHOD_TRADITIONAL
    cutoffs: CutoffSet = field(default_factory=CutoffSet)
    relevance_threshold: int = 1
    query_limit: int | None = None
    cache_dir: str | None = None
    rerank_traditional: bool = False  # ablation override; TR is never reranked by default

    def __post_init__(self):
        if self.chunking_mode not in (EARLY, LATE):
            raise ConfigError(f"unknown chunking_mode {self.chunking_mode!r}")
        if self.retrieval_method not in (METHOD_TRADITIONAL, METHOD_RANK_FUSION_RERANK):
            raise ConfigError(f"unknown retrieval_method {self.retrieval_method!r}")
        if self.fusion.candidate_depth < max(self.cutoffs.ks):
            raise ConfigError("fusion candidate_depth must cover the largest cutoff")

    @property
    def cm_label(self) -> str:
        return CM_LABELS[(self.segmenter.strategy, self.contextualize)]

    @property
    def label(self) -> str:
        parts = [self.cm_label, self.retrieval_method]
        if self.chunking_mode == LATE:
            parts.append(LATE)
        return " ".join(parts)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["cutoffs"] = list(self.cutoffs.ks)
        return data

    def config_hash(self) -> str:
        """Digest of the semantic fields; cache location does not change results."""
        data = self.to_dict()
        data.pop("cache_dir")
        return hashlib.sha256(
            json.dumps(data, sort_keys=True, ensure_ascii=False).encode("utf-8")
        ).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for key in ("corpus_file", "queries_file", "qrels_file"):
            if key not in data:
                raise ConfigError(f"config is missing required field {key!r}")
        if isinstance(data.get("subset"), dict):
            data["subset"] = CorpusSubset(**data["subset"])
        if isinstance(data.get("segmenter"), dict):
            data["segmenter"] = SegmenterConfig(**data["segmenter"])
        if isinstance(data.get("context_prompt"), dict):
            data["context_prompt"] = ContextPrompt(**data["context_prompt"])
        if isinstance(data.get("fusion"), dict):
            data["fusion"] = FusionConfig(**data["fusion"])
        if isinstance(data.get("bm25"), dict):
            data["bm25"] = Bm25Params(**data["bm25"])
        if isinstance(data.get("cutoffs"), (list, tuple)):
            data["cutoffs"] = CutoffSet(ks=tuple(data["cutoffs"]))
        return cls(**data)


@dataclass
class RunManifest:
    """Provenance record emitted for every run."""

    config_hash: str
    label: str
    config: dict
    providers: dict[str, str]
    counts: dict[str, int]
    timings: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    cache_events: dict[str, str] = field(default_factory=dict)
    degraded: bool = False

    def to_dict(self, include_timings: bool = True) -> dict:
        data = {
            "config_hash": self.config_hash,
            "label": self.label,
            "config": self.config,
            "providers": dict(sorted(self.providers.items())),
            "counts": dict(sorted(self.counts.items())),
            "warnings": sorted(self.warnings),
            "cache_events": dict(sorted(self.cache_events.items())),
            "degraded": self.degraded,
        }
        if include_timings:
            data["timings"] = self.timings
        return data

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings=include_timings), sort_keys=True)


class _WarningCollector(logging.Handler):
    """Captures chunklab warnings during a run for the manifest."""

    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.messages.append(record.getMessage())


def make_embedder(provider_cfg: dict) -> TokenEmbedder:
    name = provider_cfg.get("name", "hash")
    if name in ("hash", "test"):
        options = {k: v for k, v in provider_cfg.items() if k != "name"}
        return HashEmbedder(HashEmbedderConfig(**options))
    if name == "remote":
        endpoint = os.environ.get(ENV_EMBED_ENDPOINT) or provider_cfg.get("endpoint")
        if not endpoint:
            raise ConfigError("remote embedding provider requires an endpoint")
        return RemoteEmbedder(endpoint)
    raise ConfigError(f"unknown embedding provider {name!r}")


def make_contextualizer(provider_cfg: dict):
    name = provider_cfg.get("name", "mock")
    if name == "mock":
        return MockContextualizer()
    if name == "remote":
        endpoint = os.environ.get(ENV_GENERATE_ENDPOINT) or provider_cfg.get("endpoint")
        if not endpoint:
            raise ConfigError("remote LLM provider requires an endpoint")
        return LlmContextualizer(RemoteGenerator(endpoint), prompt_name=endpoint)
    raise ConfigError(f"unknown LLM provider {name!r}")


def make_reranker(provider_cfg: dict):
    name = provider_cfg.get("name", "overlap")
    if name in ("overlap", "mock"):
        return OverlapReranker()
    if name == "remote":
        endpoint = os.environ.get(ENV_RERANK_ENDPOINT) or provider_cfg.get("endpoint")
        if not endpoint:
            raise ConfigError("remote rerank provider requires an endpoint")
        return RemoteReranker(endpoint)
    raise ConfigError(f"unknown rerank provider {name!r}")


def make_generator(provider_cfg: dict):
    """Answer-generation provider; None selects the extractive fallback."""
    name = provider_cfg.get("name", "mock")
    if name == "mock":
        return None
    if name == "remote":
        endpoint = os.environ.get(ENV_GENERATE_ENDPOINT) or provider_cfg.get("endpoint")
        if not endpoint:
            raise ConfigError("remote LLM provider requires an endpoint")
        return RemoteGenerator(endpoint)
    raise ConfigError(f"unknown LLM provider {name!r}")


def _corpus_digest(docs: list[Document]) -> str:
    return cache_io.content_key(*(f"{d.id}\x1f{d.title}\x1f{d.text}" for d in docs))


def _queries_digest(queries: list[Query]) -> str:
    return cache_io.content_key(*(f"{q.id}\x1f{q.text}" for q in queries))


def _provider_signature(provider: TokenEmbedder) -> str:
    info = provider.info()
    return f"{info.name}|dim={info.dim}|max_tokens={info.max_tokens}"


def _segmenter_signature(cfg: SegmenterConfig) -> str:
    return f"{cfg.strategy}|w={cfg.window_chars}|m={cfg.max_chunk_chars}"


@dataclass
class _Pipeline:
    """Mutable state threaded through the stages of one experiment run."""

    cfg: ExperimentConfig
    docs: list[Document] = field(default_factory=list)
    queries: list[Query] = field(default_factory=list)
    qrels: object = None
    chunks_by_doc: dict[str, list[Chunk]] = field(default_factory=dict)
    chunk_vectors: dict[str, np.ndarray] = field(default_factory=dict)
    query_vectors: dict[str, np.ndarray] = field(default_factory=dict)
    context_stats: tuple[int, int] = (0, 0)  # (fallbacks, failures)
    manifest: RunManifest | None = None


def _load_stage(p: _Pipeline) -> None:
    cfg = p.cfg
    p.docs = load_corpus(cfg.corpus_file)
    p.queries = load_queries(cfg.queries_file)
    p.qrels = load_qrels(cfg.qrels_file)
    if cfg.subset is not None:
        p.docs, p.qrels = subset_corpus(p.docs, p.qrels, cfg.subset)
    if cfg.query_limit is not None:
        p.queries = p.queries[: cfg.query_limit]


def _segment_stage(p: _Pipeline) -> None:
    for doc in p.docs:
        spans = segment(doc, p.cfg.segmenter)
        p.chunks_by_doc[doc.id] = slice_chunks(doc, spans)


def _context_cache_path(p: _Pipeline, cache_dir: Path, provider_name: str) -> Path:
    prompt_hash = cache_io.content_key(p.cfg.context_prompt.template,
                                       str(p.cfg.context_prompt.max_context_tokens))
    key = cache_io.content_key(
        _corpus_digest(p.docs), _segmenter_signature(p.cfg.segmenter),
        prompt_hash, provider_name,
    )
    return cache_dir / f"contexts-{key}.jsonl"


def _contextualize_stage(p: _Pipeline) -> None:
    cfg = p.cfg
    provider = make_contextualizer(cfg.llm_provider)
    cache_path = None
    if cfg.cache_dir:
        cache_path = _context_cache_path(p, Path(cfg.cache_dir), provider.name)
        if cache_path.exists():
            contexts = cache_io.load_contexts(cache_path)
            expected = {chunk_id((d, c.span.index))
                        for d, chunks in p.chunks_by_doc.items() for c in chunks}
            if expected <= set(contexts):
                for doc_id, chunks in p.chunks_by_doc.items():
                    p.chunks_by_doc[doc_id] = [
                        c.with_context(contexts[chunk_id((doc_id, c.span.index))])
                        for c in chunks
                    ]
                p.manifest.cache_events["contexts"] = "hit"
                return
    fallbacks = failures = 0
    docs_by_id = {d.id: d for d in p.docs}
    for doc_id, chunks in p.chunks_by_doc.items():
        result = contextualize(provider, docs_by_id[doc_id], chunks, cfg.context_prompt)
        p.chunks_by_doc[doc_id] = result.chunks
        fallbacks += result.fallback_count
        failures += result.failed_count
    p.context_stats = (fallbacks, failures)
    if cache_path is not None and failures == 0:
        contexts = {
            chunk_id((doc_id, c.span.index)): c.context or ""
            for doc_id, chunks in p.chunks_by_doc.items() for c in chunks
        }
        cache_io.save_contexts(cache_path, contexts)
        p.manifest.cache_events["contexts"] = "miss"


def _chunk_cache_path(p: _Pipeline, cache_dir: Path, provider_sig: str) -> Path:
    context_sig = "off"
    if p.cfg.contextualize:
        prompt_hash = cache_io.content_key(p.cfg.context_prompt.template,
                                           str(p.cfg.context_prompt.max_context_tokens))
        context_sig = f"{p.cfg.llm_provider.get('name', 'mock')}|{prompt_hash}"
    key = cache_io.content_key(
        _corpus_digest(p.docs), provider_sig, _segmenter_signature(p.cfg.segmenter),
        p.cfg.chunking_mode, context_sig,
    )
    return cache_dir / f"chunks-{key}.vec"


def _query_cache_path(p: _Pipeline, cache_dir: Path, provider_sig: str) -> Path:
    key = cache_io.content_key(_queries_digest(p.queries), provider_sig)
    return cache_dir / f"queries-{key}.vec"


def _embed_stage(p: _Pipeline, provider: TokenEmbedder) -> None:
    cfg = p.cfg
    provider_sig = _provider_signature(provider)
    chunk_path = query_path = None
    if cfg.cache_dir:
        cache_dir = Path(cfg.cache_dir)
        chunk_path = _chunk_cache_path(p, cache_dir, provider_sig)
        query_path = _query_cache_path(p, cache_dir, provider_sig)

    expected_ids = {chunk_id((doc_id, c.span.index))
                    for doc_id, chunks in p.chunks_by_doc.items() for c in chunks}
    if chunk_path is not None and chunk_path.exists():
        vectors = cache_io.load_vectors(chunk_path)
        if expected_ids <= set(vectors):
            p.chunk_vectors = vectors
            p.manifest.cache_events["chunk_embeddings"] = "hit"
        else:
            logger.warning("stale chunk embedding cache %s; recomputing", chunk_path)
    if not p.chunk_vectors:
        for doc in p.docs:
            chunks = p.chunks_by_doc[doc.id]
            if cfg.chunking_mode == EARLY:
                embedded = [embed_chunk_early(provider, c) for c in chunks]
            else:
                # Late chunking pools document-level token vectors per span;
                # generated contexts never enter the dense side (the document
                # itself already supplies the context) but still reach the
                # sparse index and the reranker via effective_text.
                embedded = embed_chunks_late(provider, doc, [c.span for c in chunks])
            for emb in embedded:
                p.chunk_vectors[chunk_id((emb.doc_id, emb.chunk_index))] = emb.vector
        if chunk_path is not None:
            cache_io.save_vectors(chunk_path, p.chunk_vectors)
            p.manifest.cache_events.setdefault("chunk_embeddings", "miss")

    if query_path is not None and query_path.exists():
        vectors = cache_io.load_vectors(query_path)
        if {q.id for q in p.queries} <= set(vectors):
            p.query_vectors = vectors
            p.manifest.cache_events["query_embeddings"] = "hit"
    if not p.query_vectors:
        p.query_vectors = {q.id: embed_text(provider, q.text) for q in p.queries}
        if query_path is not None:
            cache_io.save_vectors(query_path, p.query_vectors)
            p.manifest.cache_events.setdefault("query_embeddings", "miss")


def _index_stage(p: _Pipeline):
    records = []
    for doc in p.docs:
        for chunk in p.chunks_by_doc[doc.id]:
            cid = chunk_id((doc.id, chunk.span.index))
            dense = ChunkEmbedding(doc.id, chunk.span.index, p.chunk_vectors[cid])
            records.append(ChunkRecord.from_chunk(chunk, dense))
    return build_indexes(records, p.cfg.bm25), records


def _retrieve_stage(p: _Pipeline, sparse_index, dense_index, reranker,
                    traces: list[dict] | None = None) -> dict[str, RankedList]:
    cfg = p.cfg
    chunk_texts = {
        chunk_id((doc_id, c.span.index)): c.effective_text
        for doc_id, chunks in p.chunks_by_doc.items() for c in chunks
    }
    top_k = max(cfg.cutoffs.ks)
    rankings: dict[str, RankedList] = {}
    for query in p.queries:
        stages: dict[str, list] = {}
        query_vector = p.query_vectors[query.id]
        dense_list = retrieve_traditional(dense_index, query_vector,
                                          cfg.fusion.candidate_depth)
        stages["dense"] = dense_list.items
        if cfg.retrieval_method == METHOD_TRADITIONAL and not cfg.rerank_traditional:
            chunk_ranking = dense_list
        else:
            if cfg.retrieval_method == METHOD_RANK_FUSION_RERANK:
                sparse_hits = bm25_score(sparse_index, cfg.bm25, tokenize(query.text))
                sparse_list = RankedList(
                    items=[(chunk_id(key), score)
                           for key, score in sparse_hits[: cfg.fusion.candidate_depth]],
                )
                fused = fuse(dense_list, sparse_list, cfg.fusion)
                stages["sparse"] = sparse_list.items
                stages["fused"] = fused.items
            else:  # reranked-TR ablation
                fused = dense_list
            if fused.items:
                request = RerankRequest(
                    query_text=query.text,
                    candidates=[(cid, chunk_texts[cid]) for cid, _ in fused.items],
                    depth=cfg.fusion.candidate_depth,
                )
                chunk_ranking = rerank(reranker, request)
                stages["reranked"] = chunk_ranking.items
            else:
                chunk_ranking = fused
        ranking = aggregate_to_documents(chunk_ranking, top_k)
        rankings[query.id] = ranking
        if traces is not None:
            traces.append({"query_id": query.id, "stages": stages,
                           "documents": ranking.items, "degraded": ranking.degraded})
    return rankings


def run_experiment(cfg: ExperimentConfig, trace_path: str | None = None
                   ) -> tuple[MetricsReport, RunManifest]:
    """Execute the full pipeline for one configuration."""
    provider = make_embedder(cfg.embedding_provider)
    reranker = make_reranker(cfg.rerank_provider)
    # Fail fast if a remote provider is unreachable, before any compute.
    provider_names = {"embedding": provider.info().name}
    if cfg.retrieval_method == METHOD_RANK_FUSION_RERANK or cfg.rerank_traditional:
        if hasattr(reranker, "ping"):
            reranker.ping()
        provider_names["reranker"] = getattr(reranker, "name", "unknown")
    if cfg.contextualize:
        contextualizer = make_contextualizer(cfg.llm_provider)
        generator = getattr(contextualizer, "_generator", None)
        if hasattr(generator, "ping"):
            generator.ping()
        provider_names["contextualizer"] = contextualizer.name

    manifest = RunManifest(
        config_hash=cfg.config_hash(),
        label=cfg.label,
        config=cfg.to_dict(),
        providers=provider_names,
        counts={},
    )
    pipeline = _Pipeline(cfg=cfg)
    pipeline.manifest = manifest

    collector = _WarningCollector()
    root = logging.getLogger("chunklab")
    root.addHandler(collector)
    try:
        stages = [
            ("load", lambda: _load_stage(pipeline)),
            ("segment", lambda: _segment_stage(pipeline)),
        ]
        if cfg.contextualize:
            stages.append(("contextualize", lambda: _contextualize_stage(pipeline)))
        stages.append(("embed", lambda: _embed_stage(pipeline, provider)))

        for name, fn in stages:
            started = time.perf_counter()
            fn()
            manifest.timings[name] = time.perf_counter() - started

        started = time.perf_counter()
        (sparse_index, dense_index), records = _index_stage(pipeline)
        manifest.timings["index"] = time.perf_counter() - started

        started = time.perf_counter()
        traces: list[dict] | None = [] if trace_path else None
        rankings = _retrieve_stage(pipeline, sparse_index, dense_index, reranker,
                                   traces=traces)
        manifest.timings["retrieve"] = time.perf_counter() - started

        started = time.perf_counter()
        report = evaluate_run(
            rankings, pipeline.qrels, cfg.cutoffs,
            relevance_threshold=cfg.relevance_threshold, config_label=cfg.label,
        )
        manifest.timings["evaluate"] = time.perf_counter() - started
    finally:
        root.removeHandler(collector)

    zero_vectors = sum(1 for v in pipeline.chunk_vectors.values() if not np.any(v))
    manifest.counts = {
        "documents": len(pipeline.docs),
        "queries": len(pipeline.queries),
        "chunks": sum(len(c) for c in pipeline.chunks_by_doc.values()),
        "records": len(records),
        "zero_dense_vectors": zero_vectors,
        "evaluated_queries": report.query_count,
        "skipped_queries": report.skipped_queries,
        "context_fallbacks": pipeline.context_stats[0],
        "context_failures": pipeline.context_stats[1],
    }
    manifest.warnings = collector.messages
    manifest.degraded = (
        pipeline.context_stats[1] > 0
        or any(r.degraded for r in rankings.values())
    )
    report.degraded = manifest.degraded

    if trace_path:
        with open(trace_path, "w", encoding="utf-8") as f:
            for trace in traces or []:
                f.write(json.dumps(trace, ensure_ascii=False) + "\n")
    return report, manifest


@dataclass
class GridCell:
    label: str
    report: MetricsReport | None = None
    manifest: RunManifest | None = None
    error: str | None = None


def grid_configs(base: ExperimentConfig) -> list[ExperimentConfig]:
    """The 4 chunking methods x 2 retrieval methods grid from one base config."""
    cells = []
    for strategy, contextualized in ((FIXED_WINDOW, False), (SEMANTIC, False),
                                     (FIXED_WINDOW, True), (SEMANTIC, True)):
        for method in (METHOD_TRADITIONAL, METHOD_RANK_FUSION_RERANK):
            cells.append(replace(
                base,
                segmenter=replace(base.segmenter, strategy=strategy),
                contextualize=contextualized,
                retrieval_method=method,
            ))
    return cells


def run_grid(cfgs: list[ExperimentConfig]) -> list[GridCell]:
    """Run every cell, sharing caches; a failing cell is marked, not fatal."""
    cells = []
    for cfg in cfgs:
        try:
            report, manifest = run_experiment(cfg)
            cells.append(GridCell(label=cfg.label, report=report, manifest=manifest))
        except Exception as e:  # noqa: BLE001 - cell isolation is the point
            logger.error("grid cell %s failed: %s", cfg.label, e)
            cells.append(GridCell(label=cfg.label, error=str(e)))
    return cells


def prepare(cfg: ExperimentConfig, through: str = "segment") -> _Pipeline:
    """Run the leading pipeline stages only.

    ``through`` is one of "load", "segment", "contextualize", "embed";
    used by CLI verbs that stop short of retrieval.
    """
    order = ["load", "segment", "contextualize", "embed"]
    if through not in order:
        raise ConfigError(f"unknown stage {through!r}")
    pipeline = _Pipeline(cfg=cfg)
    pipeline.manifest = RunManifest(config_hash=cfg.config_hash(), label=cfg.label,
                                    config=cfg.to_dict(), providers={}, counts={})
    last = order.index(through)
    _load_stage(pipeline)
    if last >= 1:
        _segment_stage(pipeline)
    if last >= 2 and cfg.contextualize:
        _contextualize_stage(pipeline)
    if last >= 3:
        _embed_stage(pipeline, make_embedder(cfg.embedding_provider))
    return pipeline


def build_pipeline_indexes(pipeline: _Pipeline):
    """Indexes over an embedded pipeline; returns (sparse, dense)."""
    (sparse_index, dense_index), _ = _index_stage(pipeline)
    return sparse_index, dense_index


def generate_answer(provider, query: Query, top_chunks: list[Chunk],
                    max_tokens: int = 256) -> str:
    """Answer a query from retrieved chunks.

    With a real provider the prompt is the question followed by the chunk
    texts (contexts included) in rank order. A None provider, or a provider
    that keeps failing, selects the extractive fallback: the highest-ranked
    chunk's text verbatim (the run is then degraded, which is logged).
    """
    if not top_chunks:
        raise ConfigError("generate_answer requires at least one chunk")
    if provider is None:
        return top_chunks[0].text
    evidence = "\n\n".join(c.effective_text for c in top_chunks)
    prompt = f"Question: {query.text}\n\nContext:\n{evidence}\n\nAnswer:"
    try:
        return provider.generate(prompt, max_tokens=max_tokens)
    except ProviderError as e:
        logger.warning("answer generation failed, using extractive fallback: %s", e)
        return top_chunks[0].text


def save_run(cache_dir: str | Path, report: MetricsReport, manifest: RunManifest) -> Path:
    """Persist one run's report + manifest for later `report` rendering."""
    reports_dir = Path(cache_dir) / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    slug = re.sub(r"[^A-Za-z0-9]+", "-", manifest.label).strip("-").lower()
    path = reports_dir / f"{slug}-{manifest.config_hash}.json"
    payload = {"report": report.to_dict(), "manifest": manifest.to_dict()}
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def load_runs(cache_dir: str | Path) -> list[tuple[MetricsReport, dict]]:
    reports_dir = Path(cache_dir) / "reports"
    runs = []
    if reports_dir.is_dir():
        for path in sorted(reports_dir.glob("*.json")):
            payload = json.loads(path.read_text(encoding="utf-8"))
            runs.append((MetricsReport.from_dict(payload["report"]), payload["manifest"]))
    return runs


def mini_corpus_dir() -> Path:
    """Location of the bundled mini corpus (packaged acceptance fixture)."""
    return Path(__file__).resolve().parent / "data" / "mini"
