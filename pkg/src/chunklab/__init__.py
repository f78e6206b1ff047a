"""chunklab: chunking/retrieval experiment harness for RAG pipelines."""

from .corpus import CorpusSubset, Document, QrelSet, Query, load_corpus, load_qrels, load_queries
from .embedding import (ChunkEmbedding, HashEmbedder, HashEmbedderConfig,
                        embed_chunk_early, embed_chunks_late, embed_text, normalize)
from .evaluation import CutoffSet, MetricsReport, evaluate_run, f1_at_k, map_at_k, ndcg_at_k
from .index import Bm25Params, ChunkRecord, bm25_score, build_indexes, dense_search
from .retrieval import (FusionConfig, RankedList, RerankRequest, aggregate_to_documents,
                        fuse, rerank, retrieve_traditional)
from .runner import ExperimentConfig, grid_configs, run_experiment, run_grid
from .segmenter import (Chunk, ChunkSpan, SegmenterConfig, segment, segment_fixed,
                        segment_semantic, slice_chunks)

__version__ = "0.1.0"
