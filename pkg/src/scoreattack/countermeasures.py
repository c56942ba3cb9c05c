"""Server-side index countermeasures applied before queries are answered."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .index import IndexMatrix

logger = logging.getLogger(__name__)

KINDS = ("none", "padding", "obfuscation")
CHEN_P = 0.88703
CHEN_Q = 0.04416


@dataclass(frozen=True)
class CountermeasureConfig:
    """``p`` is the retention probability of true entries and ``q`` the
    probability of turning a false entry into a fake match. The defaults
    follow Chen et al.'s low-overhead setting; read the other way round, q
    would add most of the absent entries.
    """

    kind: str = "none"
    n_pad: int = 500
    p: float = CHEN_P
    q: float = CHEN_Q
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown countermeasure {self.kind!r}; expected one of {KINDS}")
        if self.n_pad < 1:
            raise ValueError(f"n_pad must be >= 1, got {self.n_pad}")
        for name in ("p", "q"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def apply(self, index: IndexMatrix) -> IndexMatrix:
        if self.kind == "padding":
            return pad_index(index, self.n_pad, self.seed)
        if self.kind == "obfuscation":
            return obfuscate_index(index, self.p, self.q, self.seed)
        return index


def _column_rng(seed, column: int) -> np.random.Generator:
    # independent stream per column keeps results independent of scheduling
    base = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    return np.random.default_rng(np.random.SeedSequence(base.entropy, spawn_key=(column,)))


def pad_index(index: IndexMatrix, n_pad: int, seed=None) -> IndexMatrix:
    """Add fake matches so every keyword's count is a multiple of ``n_pad``.

    Fake documents are drawn uniformly among the non-matching ones. A column
    that would exceed the number of documents is filled completely.
    """
    if n_pad < 1:
        raise ValueError(f"n_pad must be >= 1, got {n_pad}")
    bits = index.bits.copy()
    n = index.n
    saturated = 0
    for j, count in enumerate(index.column_counts()):
        target = -(-int(count) // n_pad) * n_pad
        if target > n:
            target = n
            saturated += 1
        missing = target - int(count)
        if missing <= 0:
            continue
        free = np.flatnonzero(~bits[:, j])
        fake = _column_rng(seed, j).choice(free, size=missing, replace=False)
        bits[fake, j] = True
    if saturated:
        logger.warning("padding saturated %d keyword columns at n=%d documents", saturated, n)
    return IndexMatrix(bits, index.vocab, index.doc_ids)


def obfuscate_index(index: IndexMatrix, p: float, q: float, seed=None) -> IndexMatrix:
    """Keep each true entry with probability ``p``; set each false entry with probability ``q``."""
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValueError(f"p and q must lie in [0, 1], got p={p}, q={q}")
    bits = np.empty_like(index.bits)
    for j in range(index.m):
        draws = _column_rng(seed, j).random(index.n)
        col = index.bits[:, j]
        bits[:, j] = np.where(col, draws < p, draws < q)
    return IndexMatrix(bits, index.vocab, index.doc_ids)


def entry_overhead(original: IndexMatrix, transformed: IndexMatrix) -> float:
    """Relative increase in the number of index entries."""
    before = int(original.bits.sum())
    return (int(transformed.bits.sum()) - before) / before


class Padding(TransformerMixin, BaseEstimator):
    def __init__(self, n_pad=500, random_state=None):
        self.n_pad = n_pad
        self.random_state = random_state

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return pad_index(X, self.n_pad, self.random_state)


class Obfuscation(TransformerMixin, BaseEstimator):
    def __init__(self, p=CHEN_P, q=CHEN_Q, random_state=None):
        self.p = p
        self.q = q
        self.random_state = random_state

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return obfuscate_index(X, self.p, self.q, self.random_state)
