"""Score attack simulation against access-pattern leaking encrypted search."""
from .attack import (AttackConfig, Prediction, RefinedScoreAttack, ScoreAttack, accuracy,
                     base_score_attack, estimate_n_real, refined_score_attack)
from .clustering import best_candidate_cluster
from .corpus import Corpus, Vocabulary, extract_vocabulary, preprocess, split_corpus, synthetic_corpus
from .countermeasures import CountermeasureConfig, Obfuscation, Padding
from .harness import ExperimentConfig, aggregate_stats, emit_report, run_experiment
from .index import IndexMatrix, build_index, cooccurrence
from .similarity import epsilon_similarity
from .sse import QueryDistribution, QueryLog, sample_queries, select_known_queries

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "Corpus", "CountermeasureConfig", "ExperimentConfig", "IndexMatrix",
    "Obfuscation", "Padding", "Prediction", "QueryDistribution", "QueryLog",
    "RefinedScoreAttack", "ScoreAttack", "Vocabulary", "accuracy", "aggregate_stats",
    "base_score_attack", "best_candidate_cluster", "build_index", "cooccurrence",
    "emit_report", "epsilon_similarity", "estimate_n_real", "extract_vocabulary",
    "preprocess", "refined_score_attack", "run_experiment", "sample_queries",
    "select_known_queries", "split_corpus", "synthetic_corpus",
]
