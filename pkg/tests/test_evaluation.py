import math
import random

import pytest

from chunklab.corpus import QrelSet
from chunklab.errors import ValidationError
from chunklab.evaluation import (CutoffSet, MetricsReport, evaluate_run, f1_at_k, map_at_k,
                                 ndcg_at_k, render_table)
from chunklab.retrieval import DOC_LEVEL, RankedList

import oracles


def ranking(ids, kind=DOC_LEVEL):
    n = len(ids)
    return RankedList(items=[(doc_id, 1.0 - i / max(n, 1)) for i, doc_id in enumerate(ids)],
                      kind=kind)


# ----------------------------------------------------------------- NDCG

def test_ndcg_ideal_ordering_is_one():
    assert ndcg_at_k(ranking(["d1", "d2"]), {"d1": 2, "d2": 1}, k=2) == pytest.approx(1.0)


def test_ndcg_hand_derived_case():
    # swapped grades 2 and 1: DCG = 1/log2(2) + 2/log2(3), IDCG = 2 + 1/log2(3)
    value = ndcg_at_k(ranking(["d2", "d1"]), {"d1": 2, "d2": 1}, k=2)
    dcg = 1.0 / math.log2(2) + 2.0 / math.log2(3)
    idcg = 2.0 + 1.0 / math.log2(3)
    assert dcg == pytest.approx(2.26186, abs=5e-6)
    assert idcg == pytest.approx(2.63093, abs=5e-6)
    assert value == pytest.approx(0.8597, abs=5e-5)
    assert value == pytest.approx(dcg / idcg, abs=1e-12)


def test_ndcg_no_relevant_in_topk_is_zero():
    assert ndcg_at_k(ranking(["x", "y"]), {"d1": 2}, k=2) == 0.0


def test_ndcg_one_iff_ideal_prefix():
    qrels = {"a": 3, "b": 2, "c": 1}
    assert ndcg_at_k(ranking(["a", "b", "c"]), qrels, k=3) == pytest.approx(1.0)
    assert ndcg_at_k(ranking(["b", "a", "c"]), qrels, k=3) < 1.0
    # k beyond R: filling the tail with irrelevant docs keeps NDCG at 1
    assert ndcg_at_k(ranking(["a", "b", "c", "x", "y"]), qrels, k=5) == pytest.approx(1.0)


# ------------------------------------------------------------------ MAP

def test_map_single_relevant_at_rank_one():
    assert map_at_k(ranking(["d1", "x", "y"]), {"d1": 1}, k=5) == pytest.approx(1.0)


def test_map_hand_derived_case():
    assert map_at_k(ranking(["d2", "d1", "d3"]), {"d1": 1}, k=5) == pytest.approx(0.5)


def test_map_nothing_relevant_retrieved():
    assert map_at_k(ranking(["x", "y"]), {"d1": 1}, k=5) == 0.0


# ------------------------------------------------------------------- F1

def test_f1_hand_derived_case():
    # R=4, H=2, k=5: P=0.4, Rc=0.5, F1 = 0.4/0.9 * 2 * 0.5
    qrels = {f"d{i}": 1 for i in range(4)}
    value = f1_at_k(ranking(["d0", "d1", "x", "y", "z"]), qrels, k=5)
    assert value == pytest.approx(2 * 0.4 * 0.5 / 0.9, abs=1e-12)
    assert value == pytest.approx(0.4444, abs=5e-5)


def test_f1_perfect_retrieval():
    qrels = {f"d{i}": 1 for i in range(5)}
    assert f1_at_k(ranking([f"d{i}" for i in range(5)]), qrels, k=5) == pytest.approx(1.0)


def test_f1_no_hits_zero():
    assert f1_at_k(ranking(["x"]), {"d1": 1}, k=5) == 0.0


# ---------------------------------------------------------- evaluate_run

def qrelset(mapping):
    return QrelSet({(q, d): g for q, per_query in mapping.items()
                    for d, g in per_query.items()})


def test_evaluate_run_single_ideal_query():
    qrels = qrelset({"q1": {"d1": 2, "d2": 1}})
    report = evaluate_run({"q1": ranking(["d1", "d2"])}, qrels, CutoffSet((5, 10)))
    assert report.per_metric["ndcg@5"] == pytest.approx(1.0)
    assert report.per_metric["map@5"] == pytest.approx(1.0)
    r = 2
    expected_f1 = 2 * (r / 5) * 1.0 / (r / 5 + 1.0)
    assert report.per_metric["f1@5"] == pytest.approx(expected_f1)
    assert report.query_count == 1


def test_evaluate_run_mean_of_two_queries():
    qrels = qrelset({"q1": {"d1": 1}, "q2": {"d9": 1}})
    rankings = {"q1": ranking(["d1"]), "q2": ranking(["x", "y"])}
    report = evaluate_run(rankings, qrels, CutoffSet((5,)))
    assert report.per_metric["ndcg@5"] == pytest.approx(0.5)
    assert report.query_count == 2


def test_evaluate_run_excludes_queries_without_relevant_docs():
    qrels = qrelset({"q1": {"d1": 1}, "q2": {}, "q3": {"d5": 0}})
    rankings = {q: ranking(["d1"]) for q in ("q1", "q2", "q3")}
    report = evaluate_run(rankings, qrels, CutoffSet((5,)))
    assert report.query_count == 1
    assert report.skipped_queries == 2
    assert report.per_metric["ndcg@5"] == pytest.approx(1.0)


def test_evaluate_run_empty_rejected():
    with pytest.raises(ValidationError):
        evaluate_run({}, QrelSet(), CutoffSet())


def test_metrics_depend_only_on_order():
    rng = random.Random(17)
    qrels = {f"d{i}": rng.randint(0, 3) for i in range(10)}
    ids = [f"d{i}" for i in range(10)]
    rng.shuffle(ids)
    base = ranking(ids)
    rescaled = RankedList(items=[(cid, 100.0 + 5.0 * s) for cid, s in base.items],
                          kind=DOC_LEVEL)
    for k in (1, 3, 5, 10):
        assert ndcg_at_k(base, qrels, k) == ndcg_at_k(rescaled, qrels, k)
        assert map_at_k(base, qrels, k) == map_at_k(rescaled, qrels, k)
        assert f1_at_k(base, qrels, k) == f1_at_k(rescaled, qrels, k)


def test_metrics_match_reference_implementations():
    rng = random.Random(4)
    for _ in range(200):
        universe = [f"d{i}" for i in range(rng.randint(1, 15))]
        grades = {d: rng.randint(0, 3) for d in universe if rng.random() < 0.7}
        ids = rng.sample(universe, k=rng.randint(1, len(universe)))
        rl = ranking(ids)
        for k in (1, 5, 10):
            assert ndcg_at_k(rl, grades, k) == pytest.approx(
                oracles.ndcg_reference(ids, grades, k), abs=1e-9)
            assert map_at_k(rl, grades, k) == pytest.approx(
                oracles.map_reference(ids, grades, k), abs=1e-9)
            assert f1_at_k(rl, grades, k) == pytest.approx(
                oracles.f1_reference(ids, grades, k), abs=1e-9)


def test_swapping_relevant_upward_never_hurts():
    rng = random.Random(23)
    for _ in range(100):
        universe = [f"d{i}" for i in range(8)]
        grades = {d: rng.randint(0, 2) for d in universe}
        if not any(g >= 1 for g in grades.values()):
            grades["d0"] = 1
        ids = universe[:]
        rng.shuffle(ids)
        # find an (irrelevant, relevant) adjacent pair and swap upward
        for i in range(len(ids) - 1):
            if grades.get(ids[i], 0) == 0 and grades.get(ids[i + 1], 0) >= 1:
                swapped = ids[:]
                swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
                for k in (1, 3, 5, 8):
                    assert ndcg_at_k(ranking(swapped), grades, k) >= \
                        ndcg_at_k(ranking(ids), grades, k) - 1e-12
                    assert map_at_k(ranking(swapped), grades, k) >= \
                        map_at_k(ranking(ids), grades, k) - 1e-12
                    assert f1_at_k(ranking(swapped), grades, k) >= \
                        f1_at_k(ranking(ids), grades, k) - 1e-12
                break


def test_report_round_trip_and_table():
    report = MetricsReport(config_label="FUC TR",
                           per_metric={"ndcg@5": 0.5, "map@5": 0.25, "f1@5": 0.3,
                                       "ndcg@10": 0.4, "map@10": 0.2, "f1@10": 0.28},
                           query_count=9)
    assert MetricsReport.from_dict(report.to_dict()) == report
    table = render_table([report])
    assert "FUC TR" in table
    assert "0.500" in table and "NDCG@5" in table
