"""Document-keyword incidence matrices and co-occurrence tensors."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from sklearn.utils.validation import check_array

from .corpus import Corpus, Vocabulary

DEFAULT_MEMORY_BUDGET = 2 * 1024**3  # bytes


class MemoryBudgetExceeded(MemoryError):
    def __init__(self, required: int, budget: int):
        super().__init__(
            f"co-occurrence tensor needs {required} bytes, memory budget is {budget} bytes"
        )
        self.required = required
        self.budget = budget


@dataclass
class IndexMatrix:
    """Binary n x m matrix: ``bits[i, j]`` is set iff keyword j occurs in document i."""

    bits: np.ndarray
    vocab: Vocabulary
    doc_ids: list[str] | None = None

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 2 or self.bits.shape[1] != len(self.vocab):
            raise ValueError(
                f"index shape {self.bits.shape} does not match vocabulary of size {len(self.vocab)}"
            )

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    @property
    def m(self) -> int:
        return self.bits.shape[1]

    def column_counts(self) -> np.ndarray:
        return self.bits.sum(axis=0)

    def response(self, j: int) -> np.ndarray:
        """Row indices of the documents matching keyword ``j``."""
        return np.flatnonzero(self.bits[:, j])

    def packed(self) -> np.ndarray:
        """Rows packed eight keywords per byte (for compact caching)."""
        return np.packbits(self.bits, axis=1)


@dataclass
class CoocTensor:
    """Relative co-occurrence frequencies of order ``values.ndim``."""

    values: np.ndarray
    n_basis: float

    @property
    def order(self) -> int:
        return self.values.ndim

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def build_index(corpus: Corpus, vocab: Vocabulary) -> IndexMatrix:
    bits = np.zeros((len(corpus), len(vocab)), dtype=bool)
    positions = vocab.positions
    for i, (_, kws) in enumerate(corpus.documents):
        cols = [positions[kw] for kw in kws if kw in positions]
        bits[i, cols] = True
    return IndexMatrix(bits, vocab, corpus.doc_ids)


def tensor_bytes(m: int, order: int, itemsize: int = 8) -> int:
    return int(m) ** int(order) * itemsize


def cooccurrence_counts(bits, order: int = 2, memory_budget: int = DEFAULT_MEMORY_BUDGET,
                        block_size: int = 4096) -> np.ndarray:
    """Number of rows in which each ``order``-tuple of columns is jointly set.

    Order 2 is a blocked Gram product. Higher orders fix the leading
    ``order - 2`` axes and take the Gram product of the rows containing all
    fixed columns, so sparse rows keep the work proportional to the data.
    Counts are exact in float64 up to 2**53 rows.
    """
    if order < 2:
        raise ValueError(f"co-occurrence order must be >= 2, got {order}")
    x = check_array(bits, dtype=np.float64, ensure_min_samples=0, ensure_min_features=0)
    n, m = x.shape
    required = tensor_bytes(m, order)
    if required > memory_budget:
        raise MemoryBudgetExceeded(required, memory_budget)
    if order == 2:
        out = np.zeros((m, m))
        for start in range(0, n, block_size):
            block = x[start:start + block_size]
            out += block.T @ block
        return out
    out = np.zeros((m,) * order)
    for prefix in itertools.combinations_with_replacement(range(m), order - 2):
        rows = np.all(x[:, list(prefix)] > 0, axis=1)
        if not rows.any():
            continue
        sub = x[rows]
        gram = sub.T @ sub
        # every prefix ordering shares the slab of its sorted representative
        for perm in set(itertools.permutations(prefix)):
            out[perm] = gram
    return out


def cooccurrence(index, order: int = 2, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> CoocTensor:
    """Relative co-occurrence tensor of an index: joint counts divided by n."""
    bits = index.bits if isinstance(index, IndexMatrix) else index
    counts = cooccurrence_counts(bits, order, memory_budget)
    n = np.asarray(bits).shape[0]
    if n:
        counts /= n
    return CoocTensor(counts, n_basis=n)
