import dataclasses
import json

import pytest

from chunklab.corpus import CorpusSubset, Query
from chunklab.errors import ConfigError, ProviderError
from chunklab.evaluation import CutoffSet
from chunklab.retrieval import METHOD_RANK_FUSION_RERANK
from chunklab.runner import (ExperimentConfig, generate_answer, grid_configs,
                             mini_corpus_dir, run_experiment, run_grid)
from chunklab.segmenter import Chunk, ChunkSpan, SegmenterConfig

import oracles


def mini_config(**overrides) -> ExperimentConfig:
    root = mini_corpus_dir()
    base = dict(
        corpus_file=str(root / "corpus.jsonl"),
        queries_file=str(root / "queries.jsonl"),
        qrels_file=str(root / "qrels" / "test.tsv"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_mini_corpus_ships_with_package():
    root = mini_corpus_dir()
    assert (root / "corpus.jsonl").is_file()
    assert (root / "queries.jsonl").is_file()
    assert (root / "qrels" / "test.tsv").is_file()


def test_cm_labels():
    assert mini_config().cm_label == "FUC"
    assert mini_config(segmenter=SegmenterConfig(strategy="semantic")).cm_label == "SUC"
    assert mini_config(contextualize=True).cm_label == "FCC"
    assert mini_config(contextualize=True,
                       segmenter=SegmenterConfig(strategy="semantic")).cm_label == "SCC"


def test_config_hash_stable_under_field_reordering():
    cfg = mini_config()
    data = cfg.to_dict()
    reordered = dict(reversed(list(data.items())))
    assert ExperimentConfig.from_dict(reordered).config_hash() == cfg.config_hash()


def test_config_hash_ignores_cache_dir_but_not_semantics(tmp_path):
    cfg = mini_config()
    assert cfg.config_hash() == mini_config(cache_dir=str(tmp_path)).config_hash()
    assert cfg.config_hash() != mini_config(retrieval_method="RFR").config_hash()


def test_config_validation():
    with pytest.raises(ConfigError):
        mini_config(chunking_mode="middle")
    with pytest.raises(ConfigError):
        mini_config(retrieval_method="BOTH")
    with pytest.raises(ConfigError):
        mini_config(cutoffs=CutoffSet((5, 100)))  # candidate_depth 50 < 100
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"corpus_file": "x"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**mini_config().to_dict(), "zzz": 1})


def test_fuc_tr_matches_independent_oracle():
    report, manifest = run_experiment(mini_config())
    root = mini_corpus_dir()
    oracle = oracles.oracle_experiment(
        root / "corpus.jsonl", root / "queries.jsonl", root / "qrels" / "test.tsv",
        contextualized=False, method="TR",
    )
    for name in ("ndcg@5", "map@5", "f1@5", "ndcg@10", "map@10", "f1@10"):
        assert report.per_metric[name] == pytest.approx(oracle[name], abs=1e-9)
    assert report.query_count == oracle["evaluated"]
    assert manifest.counts["documents"] == 20
    assert not manifest.degraded


def test_early_and_late_reports_identical_at_alpha_zero():
    for strategy in ("fixed_window", "semantic"):
        base = dict(
            segmenter=SegmenterConfig(strategy=strategy),
            embedding_provider={"name": "hash", "dim": 64, "alpha": 0.0},
        )
        early_report, _ = run_experiment(mini_config(chunking_mode="early", **base))
        late_report, _ = run_experiment(mini_config(chunking_mode="late", **base))
        assert early_report.per_metric == late_report.per_metric


def test_contextual_rfr_beats_plain_tr_on_ambiguous_corpus():
    plain, _ = run_experiment(mini_config())
    contextual, _ = run_experiment(mini_config(contextualize=True,
                                               retrieval_method=METHOD_RANK_FUSION_RERANK))
    assert contextual.per_metric["ndcg@5"] >= plain.per_metric["ndcg@5"] + 0.05


def test_determinism_byte_identical_reports():
    cfg = mini_config(contextualize=True, retrieval_method=METHOD_RANK_FUSION_RERANK)
    report1, manifest1 = run_experiment(cfg)
    report2, manifest2 = run_experiment(cfg)
    assert report1.to_json() == report2.to_json()
    assert manifest1.to_json(include_timings=False) == manifest2.to_json(include_timings=False)


def test_cold_and_warm_cache_identical_metrics(tmp_path):
    cfg = mini_config(cache_dir=str(tmp_path), contextualize=True,
                      retrieval_method=METHOD_RANK_FUSION_RERANK)
    cold_report, cold_manifest = run_experiment(cfg)
    assert cold_manifest.cache_events["chunk_embeddings"] == "miss"
    warm_report, warm_manifest = run_experiment(cfg)
    assert warm_manifest.cache_events["chunk_embeddings"] == "hit"
    assert warm_manifest.cache_events["query_embeddings"] == "hit"
    assert warm_manifest.cache_events["contexts"] == "hit"
    assert cold_report.to_json() == warm_report.to_json()


def test_subset_and_query_limit_flow_through():
    cfg = mini_config(subset=CorpusSubset(fraction=0.5, seed=7), query_limit=4)
    report, manifest = run_experiment(cfg)
    assert manifest.counts["documents"] == 10
    assert manifest.counts["queries"] == 4
    # query with all judged docs dropped counts as skipped, not scored
    assert report.query_count + report.skipped_queries == 4


def test_trace_records_stage_scores(tmp_path):
    trace = tmp_path / "trace.jsonl"
    run_experiment(mini_config(query_limit=2, retrieval_method=METHOD_RANK_FUSION_RERANK),
                   trace_path=str(trace))
    lines = [json.loads(line) for line in trace.read_text().splitlines()]
    assert len(lines) == 2
    for line in lines:
        assert set(line["stages"]) == {"dense", "sparse", "fused", "reranked"}
        assert line["documents"]
        # candidates carry (chunk id, score) pairs at every stage
        cid, score = line["stages"]["fused"][0]
        assert "#" in cid and isinstance(score, float)


def test_trace_traditional_has_dense_stage_only(tmp_path):
    trace = tmp_path / "trace.jsonl"
    run_experiment(mini_config(query_limit=1), trace_path=str(trace))
    line = json.loads(trace.read_text().splitlines()[0])
    assert set(line["stages"]) == {"dense"}


def test_grid_shape_and_labels():
    cells = grid_configs(mini_config())
    assert [c.label for c in cells] == [
        "FUC TR", "FUC RFR", "SUC TR", "SUC RFR",
        "FCC TR", "FCC RFR", "SCC TR", "SCC RFR",
    ]


def test_grid_runs_and_isolates_failures(tmp_path):
    good = mini_config(query_limit=3)
    broken = dataclasses.replace(good, corpus_file=str(tmp_path / "missing.jsonl"))
    cells = run_grid([good, broken, dataclasses.replace(good, retrieval_method="RFR")])
    assert cells[0].report is not None and cells[0].error is None
    assert cells[1].report is None and cells[1].error
    assert cells[2].report is not None


def test_singleton_grid_equals_run_experiment():
    cfg = mini_config(query_limit=3)
    cell = run_grid([cfg])[0]
    report, _ = run_experiment(cfg)
    assert cell.report.to_json() == report.to_json()


def test_rerank_traditional_ablation_flag():
    plain, _ = run_experiment(mini_config())
    ablated, manifest = run_experiment(mini_config(rerank_traditional=True))
    assert "reranker" in manifest.providers
    # same candidates, reordered by the overlap scorer instead of cosine
    assert ablated.per_metric != plain.per_metric


def test_grid_cells_share_cache_without_changing_metrics(tmp_path):
    configs = grid_configs(mini_config(query_limit=5))
    uncached = [cell.report.to_json() for cell in run_grid(configs)]
    cached_configs = grid_configs(mini_config(query_limit=5, cache_dir=str(tmp_path)))
    cached = [cell.report.to_json() for cell in run_grid(cached_configs)]
    assert uncached == cached
    rerun = [cell.report.to_json() for cell in run_grid(cached_configs)]  # warm
    assert rerun == cached
    # TR and RFR cells of one chunking method share one embedding cache file,
    # so 8 cells produce only 4 caches (2 strategies x context on/off)
    assert len(list(tmp_path.glob("chunks-*.vec"))) == 4


def test_late_contextual_combination_runs():
    # contexts reach the sparse index while late dense vectors ignore them
    report, manifest = run_experiment(mini_config(
        chunking_mode="late", contextualize=True,
        retrieval_method=METHOD_RANK_FUSION_RERANK, query_limit=3))
    assert manifest.counts["context_failures"] == 0
    assert 0.0 <= report.per_metric["ndcg@5"] <= 1.0


# -------------------------------------------------------- answer hook

def make_chunks(texts, contexts=None):
    contexts = contexts or [None] * len(texts)
    return [Chunk(span=ChunkSpan("d", i, 0, len(t)), text=t, context=c)
            for i, (t, c) in enumerate(zip(texts, contexts))]


def test_generate_answer_mock_is_extractive():
    chunks = make_chunks(["Paris is the capital.", "Other text."])
    answer = generate_answer(None, Query(id="q", text="capital of France?"), chunks)
    assert answer == "Paris is the capital."


def test_generate_answer_requires_chunks():
    with pytest.raises(ConfigError):
        generate_answer(None, Query(id="q", text="x"), [])


def test_generate_answer_prompt_assembly_in_rank_order():
    seen = {}

    class Recorder:
        def generate(self, prompt, max_tokens):
            seen["prompt"] = prompt
            return "generated"

    chunks = make_chunks(["first chunk", "second chunk"], contexts=["ctx one", None])
    out = generate_answer(Recorder(), Query(id="q", text="the question"), chunks)
    assert out == "generated"
    prompt = seen["prompt"]
    assert "the question" in prompt
    assert prompt.index("ctx one") < prompt.index("first chunk") < prompt.index("second chunk")


def test_generate_answer_falls_back_on_provider_failure():
    class Failing:
        def generate(self, prompt, max_tokens):
            raise ProviderError("down")

    chunks = make_chunks(["safe extractive answer"])
    out = generate_answer(Failing(), Query(id="q", text="x"), chunks)
    assert out == "safe extractive answer"
