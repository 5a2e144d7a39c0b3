"""Generate-then-retrieve sequential recommendation engine.

Stages: corpus ingestion, prompt serialization, candidate generation,
lexical (BM25) or dense (dot-product) retrieval over the full catalog,
and leave-last-out Recall@k / NDCG@k evaluation with user segments.
"""

from .corpus import (
    Catalog,
    DatasetStats,
    Interaction,
    Item,
    SegmentThresholds,
    SplitExample,
    UserSequence,
    assign_segment,
    build_sequences,
    compute_stats,
    leave_last_out_split,
    parse_metadata,
    parse_reviews,
)
from .dense import DenseIndex, HashEmbeddingProvider, build_dense_index, dense_topk
from .evaluate import EvalReport, RankOutcome, ndcg_at_k, recall_at_k, segment_report
from .generate import CandidateSet, ExternalGenerator, LastItemGenerator, OracleGenerator
from .lexical import LexicalIndex, build_lexical_index, lexical_topk, score_bm25, tokenize
from .pipeline import ExperimentConfig, RecommendationList, merge_beams, recommend_topk, run_experiment
from .textify import (
    PromptTemplate,
    RenderedExample,
    build_test_prompt,
    build_training_text,
    parse_generated_candidate,
    render_item,
)

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "CandidateSet",
    "DatasetStats",
    "DenseIndex",
    "EvalReport",
    "ExperimentConfig",
    "ExternalGenerator",
    "HashEmbeddingProvider",
    "Interaction",
    "Item",
    "LastItemGenerator",
    "LexicalIndex",
    "OracleGenerator",
    "PromptTemplate",
    "RankOutcome",
    "RecommendationList",
    "RenderedExample",
    "SegmentThresholds",
    "SplitExample",
    "UserSequence",
    "assign_segment",
    "build_dense_index",
    "build_lexical_index",
    "build_sequences",
    "build_test_prompt",
    "build_training_text",
    "compute_stats",
    "dense_topk",
    "leave_last_out_split",
    "lexical_topk",
    "merge_beams",
    "ndcg_at_k",
    "parse_generated_candidate",
    "parse_metadata",
    "parse_reviews",
    "recall_at_k",
    "recommend_topk",
    "render_item",
    "run_experiment",
    "score_bm25",
    "segment_report",
    "tokenize",
]
