"""Co-frequency difference between two document sets and its Frobenius norm."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Vocabulary
from .index import build_index, cooccurrence_counts


@dataclass(frozen=True)
class SimilarityReport:
    epsilon: float
    vocab_overlap: float
    vocab: Vocabulary


def sim_matrix(d1: Corpus, d2: Corpus, vocab: Vocabulary) -> np.ndarray:
    """Entry (i, j): co-frequency of keywords i, j in ``d1`` minus that in ``d2``."""
    for d in (d1, d2):
        if len(d) == 0:
            raise ValueError(f"document set '{d.name}' is empty")
    c1 = cooccurrence_counts(build_index(d1, vocab).bits) / len(d1)
    c2 = cooccurrence_counts(build_index(d2, vocab).bits) / len(d2)
    return c1 - c2


def epsilon_similarity(d_sim: Corpus, d_real: Corpus, vocab: Vocabulary,
                       vocab_sim: Vocabulary | None = None) -> SimilarityReport:
    """Frobenius norm of the difference over ``vocab`` (the queryable vocabulary).

    ``vocab_overlap`` is the share of ``vocab`` also present in ``vocab_sim``
    (by default every keyword occurring in ``d_sim``).
    """
    eps = float(np.linalg.norm(sim_matrix(d_sim, d_real, vocab), "fro"))
    if len(vocab) == 0:
        return SimilarityReport(eps, 1.0, vocab)
    if vocab_sim is None:
        attacker_side = set(d_sim.document_frequencies())
    else:
        attacker_side = set(vocab_sim)
    overlap = sum(1 for kw in vocab if kw in attacker_side) / len(vocab)
    return SimilarityReport(eps, overlap, vocab)
