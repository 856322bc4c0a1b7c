"""Topic novelty from aligned per-year word embeddings, and its relation to growth."""

from __future__ import annotations

from .align import AlignedSeries, align_series, cos_sim, fit_procrustes, orthogonal_procrustes
from .corpus import (
    Document,
    Lexicon,
    PeriodCorpus,
    apply_lexicon,
    bucket_by_period,
    expand_acronyms,
    normalize_text,
    preprocess_document,
)
from .embedder import (
    EmbeddingMatrix,
    Hyperparams,
    Vocabulary,
    build_vocab,
    sgns_pair_objective,
    train_period_models,
    train_sgns,
)
from .errors import TopicNoveltyError
from .novelty import NoveltySeries, neighbors, novelty, novelty_table, select_display_terms
from .panel import (
    PanelDataset,
    PanelRow,
    RegressionResult,
    TestResult,
    build_panel,
    f_test_time_effects,
    fixed_effects,
    hausman,
    lm_test,
    pooled_ols,
    random_effects,
    window_sweep,
)
from .topics import DescriptorStats, TopicYearCounts, growth, select_topics, sid, topic_age
from .viz import build_scene, render_coevolution, render_semantic_map, tsne_2d

__version__ = "0.1.0"

__all__ = [
    "AlignedSeries", "align_series", "cos_sim", "fit_procrustes", "orthogonal_procrustes",
    "Document", "Lexicon", "PeriodCorpus", "apply_lexicon", "bucket_by_period",
    "expand_acronyms", "normalize_text", "preprocess_document",
    "EmbeddingMatrix", "Hyperparams", "Vocabulary", "build_vocab", "sgns_pair_objective",
    "train_period_models", "train_sgns", "TopicNoveltyError",
    "NoveltySeries", "neighbors", "novelty", "novelty_table", "select_display_terms",
    "PanelDataset", "PanelRow", "RegressionResult", "TestResult", "build_panel",
    "f_test_time_effects", "fixed_effects", "hausman", "lm_test", "pooled_ols",
    "random_effects", "window_sweep",
    "DescriptorStats", "TopicYearCounts", "growth", "select_topics", "sid", "topic_age",
    "build_scene", "render_coevolution", "render_semantic_map", "tsne_2d",
]
