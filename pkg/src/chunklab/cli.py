"""Command-line interface.

Verbs: ingest (validate + cache a corpus), contextualize, embed (warm the
embedding cache), run (one experiment), grid (the full 4x2 grid), report
(render cached results). Exit codes: 0 success, 1 validation/config error,
2 provider error, 3 run degraded but complete.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
import time
from pathlib import Path

import click
import yaml

from .corpus import (load_corpus, load_qrels, load_queries, save_corpus, save_qrels,
                     save_queries, subset_corpus)
from .errors import ChunklabError, ProviderError
from .evaluation import render_table
from .index import chunk_id as make_chunk_id
from .retrieval import retrieve_traditional
from .runner import (EARLY, ExperimentConfig, build_pipeline_indexes, generate_answer,
                     grid_configs, load_runs, make_generator, mini_corpus_dir, prepare,
                     run_experiment, run_grid, save_run)
from .segmenter import FIXED_WINDOW

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PROVIDER = 2
EXIT_DEGRADED = 3


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            code = fn(*args, **kwargs)
        except ProviderError as e:
            click.echo(f"provider error: {e}", err=True)
            sys.exit(EXIT_PROVIDER)
        except ChunklabError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_VALIDATION)
        except FileNotFoundError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_VALIDATION)
        sys.exit(code or EXIT_OK)

    return wrapper


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ChunklabError(f"{path}: config must be a mapping")
    return data


def _build_config(config_path, corpus_dir, mini, mock_providers, overrides) -> ExperimentConfig:
    data = _load_config_file(config_path)
    if mini:
        corpus_dir = str(mini_corpus_dir())
    if corpus_dir:
        root = Path(corpus_dir)
        data.setdefault("corpus_file", str(root / "corpus.jsonl"))
        data.setdefault("queries_file", str(root / "queries.jsonl"))
        data.setdefault("qrels_file", str(root / "qrels" / "test.tsv"))
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    if mock_providers:
        data["embedding_provider"] = {"name": "hash"}
        data["llm_provider"] = {"name": "mock"}
        data["rerank_provider"] = {"name": "overlap"}
    return ExperimentConfig.from_dict(data)


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True),
                      default=None, help="YAML experiment config.")(fn)
    fn = click.option("--corpus-dir", default=None,
                      help="Directory holding corpus.jsonl, queries.jsonl, qrels/test.tsv.")(fn)
    fn = click.option("--mini", is_flag=True, help="Use the bundled mini corpus.")(fn)
    fn = click.option("--mock-providers", is_flag=True,
                      help="Use the deterministic built-in providers.")(fn)
    fn = click.option("--cache-dir", default=None, help="Cache directory.")(fn)
    fn = click.option("--strategy", type=click.Choice([FIXED_WINDOW, "semantic"]),
                      default=None, help="Segmentation strategy.")(fn)
    fn = click.option("--chunking-mode", type=click.Choice([EARLY, "late"]), default=None)(fn)
    fn = click.option("--contextualize/--no-contextualize", default=None)(fn)
    fn = click.option("--retrieval-method", type=click.Choice(["TR", "RFR"]), default=None)(fn)
    fn = click.option("--query-limit", type=int, default=None)(fn)
    fn = click.option("--subset-fraction", type=float, default=None)(fn)
    fn = click.option("--subset-seed", type=int, default=None)(fn)
    return fn


def _config_from_params(params) -> ExperimentConfig:
    overrides: dict = {}
    if params["cache_dir"] is not None:
        overrides["cache_dir"] = params["cache_dir"]
    if params["strategy"] is not None:
        overrides["segmenter"] = {"strategy": params["strategy"]}
    if params["chunking_mode"] is not None:
        overrides["chunking_mode"] = params["chunking_mode"]
    if params["contextualize"] is not None:
        overrides["contextualize"] = params["contextualize"]
    if params["retrieval_method"] is not None:
        overrides["retrieval_method"] = params["retrieval_method"]
    if params["query_limit"] is not None:
        overrides["query_limit"] = params["query_limit"]
    if params["subset_fraction"] is not None:
        overrides["subset"] = {
            "fraction": params["subset_fraction"],
            "seed": params["subset_seed"] or 0,
        }
    return _build_config(params["config_path"], params["corpus_dir"], params["mini"],
                         params["mock_providers"], overrides)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Chunking/retrieval experiment harness."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_common_options
@click.option("--out", "out_dir", required=True, help="Directory for the validated copy.")
@_exit_codes
def ingest(out_dir, **params):
    """Validate a corpus and cache a normalized copy."""
    cfg = _config_from_params(params)
    docs = load_corpus(cfg.corpus_file)
    queries = load_queries(cfg.queries_file)
    qrels = load_qrels(cfg.qrels_file)
    if cfg.subset is not None:
        docs, qrels = subset_corpus(docs, qrels, cfg.subset)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(docs, out / "corpus.jsonl")
    save_queries(queries, out / "queries.jsonl")
    save_qrels(qrels, out / "qrels" / "test.tsv")
    click.echo(f"ingested {len(docs)} documents, {len(queries)} queries, "
               f"{len(qrels)} judgments -> {out}")


@main.command()
@_common_options
@_exit_codes
def embed(**params):
    """Populate the embedding cache for a configuration."""
    cfg = _config_from_params(params)
    if not cfg.cache_dir:
        raise ChunklabError("embed requires --cache-dir (or cache_dir in the config)")
    started = time.perf_counter()
    pipeline = prepare(cfg, through="embed")
    total = sum(len(chunks) for chunks in pipeline.chunks_by_doc.values())
    click.echo(f"embedding cache ready under {cfg.cache_dir} "
               f"({total} chunks, {time.perf_counter() - started:.2f}s)")


@main.command()
@_common_options
@click.option("--out", "out_path", default=None, help="Also dump contexts to this JSONL file.")
@_exit_codes
def contextualize(out_path, **params):
    """Generate chunk contexts and persist them in the cache."""
    cfg = _config_from_params(params)
    cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "contextualize": True})
    pipeline = prepare(cfg, through="contextualize")
    total = sum(len(chunks) for chunks in pipeline.chunks_by_doc.values())
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            for doc_id, chunks in pipeline.chunks_by_doc.items():
                for chunk in chunks:
                    f.write(json.dumps({
                        "id": make_chunk_id((doc_id, chunk.span.index)),
                        "context": chunk.context,
                    }, ensure_ascii=False) + "\n")
    click.echo(f"contextualized {total} chunks "
               f"({pipeline.context_stats[0]} fallbacks, {pipeline.context_stats[1]} failures)")
    if pipeline.context_stats[1] > 0:
        return EXIT_DEGRADED
    return EXIT_OK


@main.command()
@_common_options
@click.option("--trace", "trace_path", default=None,
              help="Dump per-query document rankings as JSONL.")
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
@_exit_codes
def run(trace_path, as_json, **params):
    """Run a single experiment and print its metrics."""
    cfg = _config_from_params(params)
    report, manifest = run_experiment(cfg, trace_path=trace_path)
    if cfg.cache_dir:
        save_run(cfg.cache_dir, report, manifest)
    if as_json:
        click.echo(json.dumps({"report": report.to_dict(),
                               "manifest": manifest.to_dict()}, sort_keys=True))
    else:
        click.echo(render_table([report], cfg.cutoffs))
        click.echo(f"queries evaluated: {report.query_count} "
                   f"(skipped: {report.skipped_queries})")
    return EXIT_DEGRADED if manifest.degraded else EXIT_OK


@main.command()
@_common_options
@click.option("--json", "as_json", is_flag=True, help="Print reports as JSON lines.")
@_exit_codes
def grid(as_json, **params):
    """Run the 4 chunking methods x 2 retrieval methods grid."""
    base = _config_from_params(params)
    cells = run_grid(grid_configs(base))
    degraded = False
    failed = []
    reports = []
    for cell in cells:
        if cell.error is not None:
            failed.append(cell)
            continue
        reports.append(cell.report)
        degraded = degraded or cell.manifest.degraded
        if base.cache_dir:
            save_run(base.cache_dir, cell.report, cell.manifest)
    if as_json:
        for cell in cells:
            payload = {"label": cell.label, "error": cell.error}
            if cell.report is not None:
                payload["report"] = cell.report.to_dict()
            click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(render_table(reports, base.cutoffs))
        for cell in failed:
            click.echo(f"{cell.label}: FAILED ({cell.error})")
    if failed:
        return EXIT_VALIDATION
    return EXIT_DEGRADED if degraded else EXIT_OK


@main.command()
@click.option("--cache-dir", required=True, help="Cache directory holding saved reports.")
@click.option("--json", "as_json", is_flag=True, help="Print reports as JSON lines.")
@_exit_codes
def report(cache_dir, as_json):
    """Render previously saved run reports."""
    runs = load_runs(cache_dir)
    if not runs:
        raise ChunklabError(f"no saved reports under {cache_dir}")
    if as_json:
        for metrics, manifest in runs:
            click.echo(json.dumps({"report": metrics.to_dict(),
                                   "config_hash": manifest["config_hash"]}, sort_keys=True))
    else:
        click.echo(render_table([metrics for metrics, _ in runs]))


@main.command()
@_common_options
@click.option("--query-id", default=None, help="Answer only this query.")
@click.option("--top", "top_n", type=int, default=3, help="Chunks per answer prompt.")
@_exit_codes
def answer(query_id, top_n, **params):
    """Retrieve chunks for queries and produce (mock or provider-backed) answers."""
    cfg = _config_from_params(params)
    generator = make_generator(cfg.llm_provider)
    pipeline = prepare(cfg, through="embed")
    _, dense_index = build_pipeline_indexes(pipeline)

    chunks_by_id = {
        make_chunk_id((doc_id, c.span.index)): c
        for doc_id, chunks in pipeline.chunks_by_doc.items() for c in chunks
    }
    queries = [q for q in pipeline.queries if query_id in (None, q.id)]
    if not queries:
        raise ChunklabError(f"query {query_id!r} not found")
    for query in queries:
        ranking = retrieve_traditional(dense_index, pipeline.query_vectors[query.id],
                                       cfg.fusion.candidate_depth)
        top_chunks = [chunks_by_id[cid] for cid, _ in ranking.items[:top_n]]
        if not top_chunks:
            click.echo(f"{query.id}\t(no chunks retrieved)")
            continue
        text = generate_answer(generator, query, top_chunks)
        click.echo(f"{query.id}\t{text}")


if __name__ == "__main__":
    main()
