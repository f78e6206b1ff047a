#!/usr/bin/env python3
"""Build and verify the bundled mini corpus under src/chunklab/data/mini/.

The fixture is engineered, not arbitrary:
  * six near-identical company quarterly reports whose later chunks are
    ambiguous (no company name), so contextualization + BM25 + rerank has
    something real to win on;
  * every multiple of 512 characters falls between whitespace tokens in
    every document, so fixed-window early and late chunking pool the same
    token sets and coincide exactly at alpha=0;
  * every multi-chunk document's chunk vocabulary differs from the
    document-wide distribution, so early and late diverge at alpha=0.5.

The script re-verifies all of that, cross-checks the full pipeline against
the independent oracle in tests/oracles.py, and prints the oracle metric
values that tests/test_acceptance.py pins.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))
sys.path.insert(0, str(REPO / "src"))

import oracles  # noqa: E402

from chunklab.corpus import Document, load_corpus, load_qrels, load_queries  # noqa: E402
from chunklab.embedding import (HashEmbedder, HashEmbedderConfig, embed_chunk_early,  # noqa: E402
                                embed_chunks_late, whitespace_token_offsets)
from chunklab.evaluation import CutoffSet  # noqa: E402
from chunklab.runner import ExperimentConfig, run_experiment  # noqa: E402
from chunklab.segmenter import segment_fixed, segment_semantic, slice_chunks  # noqa: E402

WINDOW = 512
OUT = REPO / "src" / "chunklab" / "data" / "mini"

FILLERS = {
    1: "a", 2: "an", 3: "the", 4: "data", 5: "notes", 6: "report", 7: "figures",
    8: "analysis", 9: "estimates", 10: "statistics", 11: "projections",
    12: "measurements", 13: "distributions", 14: "considerations", 15: "recommendations",
}

COMPANIES = [
    ("acme", "Acme", "logistics"),
    ("globex", "Globex", "energy"),
    ("initech", "Initech", "software"),
    ("umbrella", "Umbrella", "pharmaceutical"),
    ("stark", "Stark", "aerospace"),
    ("wayne", "Wayne", "manufacturing"),
]

# Neutral body sentences; none of them mention revenue or growth, so the
# ambiguous closing block is the only place the company queries' content
# terms appear.
REPORT_POOL = [
    "Operating expenses declined as older facilities were consolidated.",
    "The board approved a modest increase to the capital budget.",
    "Gross margin held up on the back of stronger pricing.",
    "Cash flow from operations covered all scheduled debt payments.",
    "Hiring slowed in the second half of the period.",
    "Customer retention remained near record levels.",
    "Analysts noted the steady performance of the core business.",
    "Inventory levels returned to their normal seasonal range.",
    "Research spending was flat compared with the prior year.",
    "Management reiterated its full year guidance.",
    "Currency movements had a small negative effect on reported results.",
    "The dividend was maintained at the same level as before.",
    "Capital expenditure focused on maintenance rather than expansion.",
    "Regional sales were strongest in the northern markets.",
    "The firm repurchased a small number of shares.",
    "Supply chain pressures eased further during the period.",
]

# Shared verbatim across all companies: on its own, this chunk does not say
# which company it is about.
AMBIGUOUS_BLOCK = [
    "Revenue grew by 3 percent over the previous quarter.",
    "The improvement was driven by disciplined execution rather than one off gains.",
    "Management attributed the growth to returning demand in the final weeks.",
]

TOPICS = [
    ("bees", "The Waggle Dance of Honey Bees", [
        "Honey bees communicate the direction and distance of flowers with a dance.",
        "A forager returns to the hive and walks a figure of eight on the comb.",
        "The angle of the central run encodes direction relative to the sun.",
        "The duration of the waggle phase encodes the distance to the flowers.",
        "Other workers follow the dancer closely and read the vibrations.",
        "Richer nectar sources produce longer and more energetic dances.",
        "Scouts use the same dance to argue for new nest sites during swarming.",
        "The dance floor sits near the hive entrance where recruits gather.",
        "Odour carried on the dancer also helps recruits confirm the target.",
        "Cloudy skies make the dance less accurate because the sun is hidden.",
        "Researchers decoded the dance by tracking marked bees to feeders.",
        "Distance estimates come from optic flow experienced during flight.",
        "A short round dance simply means that food is very close to the hive.",
        "Dances for distant sites are rarer because foraging costs rise.",
        "The colony integrates many dances to allocate foragers efficiently.",
        "Temperature inside the hive changes how briskly the bees dance.",
    ]),
    ("mars", "Dust Storms on Mars", [
        "Dust storms on Mars can grow until they wrap around the entire planet.",
        "Global storms begin as small local disturbances in the southern summer.",
        "Sunlight heats suspended dust which strengthens the surrounding winds.",
        "The feedback loop lofts ever more dust into the thin atmosphere.",
        "Orbiters watched the great storm of 2018 dim the sky for months.",
        "Solar powered rovers struggle when the dust blocks their panels.",
        "Fine particles settle slowly because gravity on Mars is weak.",
        "Electrified dust may produce small sparks near the surface.",
        "Storm season repeats each Martian year when the planet nears the sun.",
        "Regional storms merge along the slopes of the great volcanoes.",
        "The storms redistribute bright dust and darken old surface streaks.",
        "Forecasting the storms matters for landing heavy spacecraft safely.",
        "Some years pass quietly with no global storm at all.",
        "Dust devils scour narrow tracks across the plains between storms.",
    ]),
    ("glaciers", "How Glaciers Carve Valleys", [
        "Glaciers carve deep valleys by plucking rock and grinding the bed.",
        "Ice flows slowly downhill under the pressure of its own weight.",
        "Meltwater seeps into cracks and freezes to pry blocks loose.",
        "Embedded stones scratch long striations into the bedrock below.",
        "A river valley is narrow but a glaciated valley has a broad floor.",
        "Hanging valleys mark where side glaciers joined the main trunk.",
        "Moraines of crushed rock pile up along the edges and at the snout.",
        "The rate of erosion depends on temperature at the base of the ice.",
        "Cold based glaciers slide little and protect the land beneath.",
        "Fjords are drowned glacial valleys flooded by the rising sea.",
        "Geologists read past climates from the shapes the ice left behind.",
        "Retreat exposes polished rock that weathers very slowly.",
    ]),
    ("sourdough", "Sourdough Starter Basics", [
        "A sourdough starter is a living culture of wild yeast and bacteria.",
        "Keeping a starter alive needs regular feeding with flour and water.",
        "A healthy starter smells pleasantly sour and doubles after feeding.",
        "Cold storage slows the culture when you bake less often.",
        "Discarding part of the starter keeps the acidity in balance.",
    ]),
    ("jazz", "A Short History of Bebop", [
        "Bebop emerged in the clubs of New York during the early 1940s.",
        "Small groups favoured fast tempos and adventurous harmony.",
        "Soloists built long melodic lines over rapidly moving chords.",
        "The style rewarded listening rather than dancing.",
    ]),
    ("chess", "Opening Principles in Chess", [
        "Classical opening play develops pieces quickly toward the centre.",
        "Castling early tucks the king away behind a wall of pawns.",
        "Moving the same piece twice wastes time in the opening.",
        "A lead in development often converts into a lasting attack.",
    ]),
    ("coffee", "Brewing Filter Coffee", [
        "Filter coffee rewards careful control of grind size and water heat.",
        "A medium grind slows the water just enough to extract sweetness.",
        "Water just off the boil scalds nothing and dissolves the good acids.",
        "Blooming the grounds first releases trapped carbon dioxide.",
        "A steady spiral pour keeps the bed level and the extraction even.",
    ]),
    ("cycling", "Climbing Efficiently on a Bicycle", [
        "Long climbs reward a steady rhythm more than heroic surges.",
        "Gearing low enough lets the rider spin instead of grinding.",
        "Seated climbing saves energy while standing clears short ramps.",
        "Pacing by breathing keeps effort just below the red line.",
    ]),
]


def align_words(words: list[str], window: int = WINDOW) -> str:
    """Join words with single spaces, inserting filler words so that no
    token straddles any multiple of ``window`` characters."""
    out: list[str] = []
    length = 0  # current text length

    def append(word: str):
        nonlocal length
        if out:
            out.append(word)
            length += 1 + len(word)
        else:
            out.append(word)
            length = len(word)

    for word in words:
        while True:
            start = length + 1 if out else 0
            end = start + len(word)
            boundary = ((start // window) + 1) * window
            if start < boundary < end:
                gap = boundary - start - 1  # room for a filler word before the boundary
                append(FILLERS.get(gap, FILLERS[1]))
                continue
            break
        append(word)
    return " ".join(out)


def sentences_to_text(sentences: list[str]) -> str:
    return align_words(" ".join(sentences).split())


def build_documents() -> list[dict]:
    docs = []
    for i, (slug, name, industry) in enumerate(COMPANIES):
        lead = [
            f"{name} Corporation reported a solid performance for the third quarter.",
            f"The {industry} division delivered steady output across the period.",
        ]
        pool = REPORT_POOL[3 * i:] + REPORT_POOL[:3 * i]  # same facts, rotated order
        docs.append({
            "_id": f"{slug}-report",
            "title": f"{name} Q3 2024 Quarterly Report",
            "text": sentences_to_text(lead + pool + AMBIGUOUS_BLOCK),
        })
        docs.append({
            "_id": f"{slug}-profile",
            "title": f"{name} Corporation Profile",
            "text": sentences_to_text([
                f"{name} Corporation is a privately held {industry} company.",
                "Its head office has been in the same city for decades.",
                "The firm sponsors a popular apprenticeship scheme.",
            ]),
        })
    for slug, title, sentences in TOPICS:
        docs.append({"_id": slug, "title": title, "text": sentences_to_text(sentences)})
    return docs


def build_queries() -> list[dict]:
    queries = []
    for i, (slug, name, _) in enumerate(COMPANIES, start=1):
        queries.append({
            "_id": f"q{i}",
            "text": f"{name} revenue grew by 3 percent over the previous quarter",
        })
    queries.append({"_id": "q7", "text": "how do honey bees communicate the direction of flowers"})
    queries.append({"_id": "q8", "text": "dust storms that wrap around the planet mars"})
    queries.append({"_id": "q9", "text": "how do glaciers carve deep valleys"})
    queries.append({"_id": "q10", "text": "keeping a sourdough starter alive with regular feeding"})
    return queries


def build_qrels() -> list[tuple[str, str, int]]:
    rows = []
    for i, (slug, _, _) in enumerate(COMPANIES, start=1):
        rows.append((f"q{i}", f"{slug}-report", 2))
        rows.append((f"q{i}", f"{slug}-profile", 1))
    rows.append(("q7", "bees", 2))
    rows.append(("q8", "mars", 2))
    rows.append(("q9", "glaciers", 2))
    rows.append(("q10", "sourdough", 2))
    rows.append(("q10", "coffee", 0))  # judged irrelevant
    return rows


# ------------------------------------------------------------- verification

def check_boundary_alignment(docs):
    for doc in docs:
        offsets = whitespace_token_offsets(doc["text"])
        boundaries = range(WINDOW, len(doc["text"]), WINDOW)
        for b in boundaries:
            assert not any(s < b < e for s, e in offsets), \
                f"{doc['_id']}: token straddles offset {b}"


def check_multi_chunk(docs):
    fixed_multi = semantic_multi = 0
    for doc in docs:
        if len(segment_fixed(doc["text"], WINDOW)) > 1:
            fixed_multi += 1
        if len(segment_semantic(doc["text"], WINDOW)) > 1:
            semantic_multi += 1
    assert fixed_multi >= 8, f"only {fixed_multi} multi-chunk docs (fixed)"
    assert semantic_multi >= 8, f"only {semantic_multi} multi-chunk docs (semantic)"
    print(f"multi-chunk docs: fixed={fixed_multi} semantic={semantic_multi} of {len(docs)}")


def check_early_late(docs):
    exact = HashEmbedder(HashEmbedderConfig(dim=64, alpha=0.0))
    mixed = HashEmbedder(HashEmbedderConfig(dim=64, alpha=0.5))
    worst = 1.0
    for doc in docs:
        document = Document(id=doc["_id"], title=doc["title"], text=doc["text"])
        for segmenter in (lambda t: segment_fixed(t, WINDOW, doc_id=document.id),
                          lambda t: segment_semantic(t, WINDOW, doc_id=document.id)):
            spans = segmenter(document.text)
            chunks = slice_chunks(document, spans)
            late0 = embed_chunks_late(exact, document, spans)
            for chunk, late_emb in zip(chunks, late0):
                early = embed_chunk_early(exact, chunk)
                diff = float(np.max(np.abs(early.vector - late_emb.vector)))
                assert diff < 1e-9, f"{document.id}: alpha=0 early/late diff {diff}"
            if len(spans) > 1:
                late5 = embed_chunks_late(mixed, document, spans)
                for chunk, late_emb in zip(chunks, late5):
                    early = embed_chunk_early(mixed, chunk)
                    cosine = float(early.vector @ late_emb.vector)
                    assert cosine < 1.0 - 1e-6, \
                        f"{document.id}#{chunk.span.index}: alpha=0.5 cosine {cosine}"
                    worst = min(worst, 1.0)
    print("early/late checks passed (alpha=0 exact, alpha=0.5 divergent)")


def run_cell(contextualized: bool, method: str) -> dict:
    cfg = ExperimentConfig(
        corpus_file=str(OUT / "corpus.jsonl"),
        queries_file=str(OUT / "queries.jsonl"),
        qrels_file=str(OUT / "qrels" / "test.tsv"),
        contextualize=contextualized,
        retrieval_method=method,
        cutoffs=CutoffSet((5, 10)),
    )
    report, _ = run_experiment(cfg)
    return report.per_metric


def check_against_oracle():
    results = {}
    for contextualized, method, label in ((False, "TR", "FUC TR"), (False, "RFR", "FUC RFR"),
                                          (True, "TR", "FCC TR"), (True, "RFR", "FCC RFR")):
        oracle = oracles.oracle_experiment(
            OUT / "corpus.jsonl", OUT / "queries.jsonl", OUT / "qrels" / "test.tsv",
            contextualized=contextualized, method=method,
        )
        package = run_cell(contextualized, method)
        for name in ("ndcg@5", "map@5", "f1@5", "ndcg@10", "map@10", "f1@10"):
            delta = abs(package[name] - oracle[name])
            assert delta < 1e-9, f"{label} {name}: package {package[name]} oracle {oracle[name]}"
        results[label] = {k: oracle[k] for k in
                          ("ndcg@5", "map@5", "f1@5", "ndcg@10", "map@10", "f1@10")}
        print(f"{label}: package matches oracle; ndcg@5={oracle['ndcg@5']:.6f}")
    gap = results["FCC RFR"]["ndcg@5"] - results["FUC TR"]["ndcg@5"]
    print(f"directional gap (FCC RFR - FUC TR) ndcg@5 = {gap:.4f}")
    assert gap >= 0.05 + 0.02, f"directional gap too small: {gap}"
    return results


def main():
    docs = build_documents()
    queries = build_queries()
    qrels = build_qrels()

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "qrels").mkdir(exist_ok=True)
    with open(OUT / "corpus.jsonl", "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps(doc, ensure_ascii=False) + "\n")
    with open(OUT / "queries.jsonl", "w", encoding="utf-8") as f:
        for query in queries:
            f.write(json.dumps(query, ensure_ascii=False) + "\n")
    with open(OUT / "qrels" / "test.tsv", "w", encoding="utf-8") as f:
        f.write("query-id\tcorpus-id\tscore\n")
        for qid, doc_id, grade in qrels:
            f.write(f"{qid}\t{doc_id}\t{grade}\n")

    load_corpus(OUT / "corpus.jsonl")
    load_queries(OUT / "queries.jsonl")
    load_qrels(OUT / "qrels" / "test.tsv")
    lens = sorted(len(d["text"]) for d in docs)
    print(f"{len(docs)} docs (lengths {lens[0]}..{lens[-1]}), "
          f"{len(queries)} queries, {len(qrels)} judgments")

    check_boundary_alignment(docs)
    check_multi_chunk(docs)
    check_early_late(docs)
    results = check_against_oracle()

    print("\npinned oracle values for tests/test_acceptance.py:")
    print(json.dumps(results, indent=2))


if __name__ == "__main__":
    main()
