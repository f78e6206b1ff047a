import pytest

from chunklab.corpus import (CorpusSubset, QrelSet, load_corpus, load_qrels, load_queries,
                             save_corpus, subset_corpus)
from chunklab.errors import ParseError, ValidationError


def test_load_corpus_basic(write_jsonl):
    path = write_jsonl("corpus.jsonl", [{"_id": "d1", "title": "A", "text": "cat sat"}])
    docs = load_corpus(path)
    assert len(docs) == 1
    assert (docs[0].id, docs[0].title, docs[0].text) == ("d1", "A", "cat sat")


def test_load_corpus_empty_file(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text("")
    assert load_corpus(path) == []


def test_load_corpus_preserves_file_order(write_jsonl):
    records = [{"_id": f"d{i}", "title": "", "text": f"text {i}"} for i in range(20)]
    docs = load_corpus(write_jsonl("corpus.jsonl", records))
    assert [d.id for d in docs] == [f"d{i}" for i in range(20)]


def test_load_corpus_duplicate_id(write_jsonl):
    path = write_jsonl("corpus.jsonl", [
        {"_id": "d1", "title": "", "text": "a"},
        {"_id": "d1", "title": "", "text": "b"},
    ])
    with pytest.raises(ValidationError, match="duplicate"):
        load_corpus(path)


def test_load_corpus_empty_text_rejected(write_jsonl):
    path = write_jsonl("corpus.jsonl", [{"_id": "d1", "title": "t", "text": ""}])
    with pytest.raises(ValidationError, match="empty text"):
        load_corpus(path)


def test_load_corpus_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text('{"_id": "d1", "title": "", "text": "x"}\n{broken\n')
    with pytest.raises(ParseError, match=":2:"):
        load_corpus(path)


def test_load_corpus_missing_title_defaults_empty(write_jsonl):
    docs = load_corpus(write_jsonl("corpus.jsonl", [{"_id": "d1", "text": "x"}]))
    assert docs[0].title == ""


def test_load_queries_duplicate_and_empty(write_jsonl):
    path = write_jsonl("queries.jsonl", [{"_id": "q1", "text": "a"}, {"_id": "q1", "text": "b"}])
    with pytest.raises(ValidationError):
        load_queries(path)
    path = write_jsonl("queries2.jsonl", [{"_id": "q1", "text": ""}])
    with pytest.raises(ValidationError):
        load_queries(path)


def test_load_qrels_rows_and_header(tmp_path):
    path = tmp_path / "qrels.tsv"
    path.write_text("query-id\tcorpus-id\tscore\nq1\td7\t2\nq2\td1\t0\n")
    qrels = load_qrels(path)
    assert qrels.judgments == {("q1", "d7"): 2, ("q2", "d1"): 0}


def test_load_qrels_without_header(tmp_path):
    path = tmp_path / "qrels.tsv"
    path.write_text("q1\td7\t2\n")
    assert load_qrels(path).judgments == {("q1", "d7"): 2}


def test_load_qrels_negative_score(tmp_path):
    path = tmp_path / "qrels.tsv"
    path.write_text("q1\td7\t-1\n")
    with pytest.raises(ValidationError, match="negative"):
        load_qrels(path)


def test_load_qrels_non_integer_score_mid_file(tmp_path):
    path = tmp_path / "qrels.tsv"
    path.write_text("q1\td7\t2\nq1\td8\tbad\n")
    with pytest.raises(ParseError, match=":2:"):
        load_qrels(path)


def test_load_qrels_duplicate_pair(tmp_path):
    path = tmp_path / "qrels.tsv"
    path.write_text("q1\td7\t2\nq1\td7\t1\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_qrels(path)


def _docs(n):
    from chunklab.corpus import Document
    return [Document(id=f"d{i}", title="", text=f"text {i}") for i in range(n)]


def test_subset_identity_for_fraction_one():
    docs = _docs(7)
    qrels = QrelSet({("q1", "d0"): 1, ("q1", "d6"): 2})
    for seed in (0, 1, 99):
        sub_docs, sub_qrels = subset_corpus(docs, qrels, CorpusSubset(fraction=1.0, seed=seed))
        assert sub_docs == docs
        assert sub_qrels.judgments == qrels.judgments


def test_subset_count_matches_ceiling():
    # fraction 0.2 of 300 documents keeps exactly 60
    docs = _docs(300)
    sub_docs, _ = subset_corpus(docs, QrelSet(), CorpusSubset(fraction=0.2, seed=7))
    assert len(sub_docs) == 60


def test_subset_deterministic_and_order_preserving():
    docs = _docs(50)
    cfg = CorpusSubset(fraction=0.3, seed=1234)
    first, _ = subset_corpus(docs, QrelSet(), cfg)
    second, _ = subset_corpus(docs, QrelSet(), cfg)
    assert first == second
    positions = [int(d.id[1:]) for d in first]
    assert positions == sorted(positions)
    other, _ = subset_corpus(docs, QrelSet(), CorpusSubset(fraction=0.3, seed=1235))
    assert other != first


def test_subset_drops_qrels_of_excluded_docs():
    docs = _docs(10)
    qrels = QrelSet({(f"q{i}", f"d{i}"): 1 for i in range(10)})
    sub_docs, sub_qrels = subset_corpus(docs, qrels, CorpusSubset(fraction=0.4, seed=3))
    surviving = {d.id for d in sub_docs}
    assert all(doc_id in surviving for _, doc_id in sub_qrels.judgments)
    assert len(sub_qrels) == len(surviving & {f"d{i}" for i in range(10)})


def test_subset_prefix_mode():
    docs = _docs(10)
    sub_docs, _ = subset_corpus(docs, QrelSet(), CorpusSubset(fraction=0.3, seed=0,
                                                              method="prefix"))
    assert [d.id for d in sub_docs] == ["d0", "d1", "d2"]


def test_subset_fraction_out_of_range():
    with pytest.raises(ValidationError):
        CorpusSubset(fraction=0.0)
    with pytest.raises(ValidationError):
        CorpusSubset(fraction=1.5)


def test_corpus_round_trip(tmp_path, write_jsonl):
    records = [
        {"_id": "d1", "title": "T", "text": "hello world. bye."},
        {"_id": "d2", "title": "", "text": "unicode: café — ok"},
    ]
    docs = load_corpus(write_jsonl("corpus.jsonl", records))
    out = tmp_path / "copy.jsonl"
    save_corpus(docs, out)
    assert load_corpus(out) == docs
