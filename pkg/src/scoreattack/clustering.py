"""Best-candidate clustering of one trapdoor's matching scores.

Single-linkage clustering of 1-D scores only ever merges adjacent runs of the
sorted scores, so the cluster holding the top score is cut at the largest gap
among the first ``max_size`` consecutive gaps. ``best_candidate_cluster`` uses
that shortcut; ``naive_single_linkage`` is the cubic reference used in tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NAIVE_MAX_POINTS = 200


@dataclass(frozen=True)
class CandidateCluster:
    members: tuple  # (label, score) pairs, best score first
    certainty: float

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.members)


def max_gap_cut(top_scores: np.ndarray, max_size: int) -> tuple[int, float]:
    """Cluster size and gap for scores already sorted in descending order.

    Only ``top_scores[:max_size + 1]`` is read. Equal gaps resolve to the
    smallest cluster.
    """
    gaps = top_scores[:max_size] - top_scores[1:max_size + 1]
    size = int(np.argmax(gaps)) + 1
    return size, float(gaps[size - 1])


def best_candidate_cluster(scores: Sequence[float], max_size: int,
                           labels: Sequence | None = None) -> CandidateCluster:
    """Top-score prefix delimited by the widest gap among the top ``max_size + 1`` scores.

    ``scores`` need not be sorted; a stable descending sort is applied and
    ``labels`` (default: input positions) follow their scores. ``max_size`` is
    capped at ``len(scores) - 1``.
    """
    values = np.asarray(scores, dtype=np.float64)
    if values.size < 2:
        raise ValueError("best-candidate clustering needs at least 2 scores")
    if max_size < 1:
        raise ValueError(f"max_size must be >= 1, got {max_size}")
    max_size = min(max_size, values.size - 1)
    order = np.argsort(-values, kind="stable")
    ranked = values[order]
    size, gap = max_gap_cut(ranked, max_size)
    if labels is None:
        labels = range(values.size)
    labels = list(labels)
    members = tuple((labels[i], float(values[i])) for i in order[:size])
    return CandidateCluster(members, gap)


@dataclass(frozen=True)
class Clustering:
    clusters: tuple[tuple[int, ...], ...]  # positions in the descending-sorted scores
    level: float


def _d_min(a: Sequence[float], b: Sequence[float]) -> float:
    return min(abs(x - y) for x in a for y in b)


def naive_single_linkage(scores: Sequence[float]) -> tuple[np.ndarray, list[Clustering]]:
    """All clusterings Gamma_0..Gamma_{n-1} of single-linkage on sorted scores.

    Returns the scores sorted in descending order and the clusterings, whose
    clusters are tuples of positions into that sorted array. Cubic per merge;
    capped at ``NAIVE_MAX_POINTS`` inputs.
    """
    values = np.sort(np.asarray(scores, dtype=np.float64))[::-1]
    n = values.size
    if n < 1:
        raise ValueError("need at least one score")
    if n > NAIVE_MAX_POINTS:
        raise ValueError(f"naive single-linkage is limited to {NAIVE_MAX_POINTS} points")
    current = [(i,) for i in range(n)]
    history = [Clustering(tuple(current), 0.0)]
    for _ in range(n - 1):
        best = None
        for a in range(len(current)):
            for b in range(a + 1, len(current)):
                d = _d_min(values[list(current[a])], values[list(current[b])])
                if best is None or d < best[0]:
                    best = (d, a, b)
        d, a, b = best
        merged = tuple(sorted(current[a] + current[b]))
        current = [c for i, c in enumerate(current) if i not in (a, b)] + [merged]
        current.sort()
        history.append(Clustering(tuple(current), float(d)))
    return values, history


def oracle_best_cluster(scores: Sequence[float], max_size: int,
                        hierarchy: tuple[np.ndarray, list[Clustering]] | None = None
                        ) -> tuple[int, float]:
    """Size of S_max and its gap to the rest, read off the naive hierarchy.

    Merges at equal levels count as simultaneous, so only the last clustering
    of each level is inspected; this makes the result independent of the
    order in which tied pairs are merged. ``hierarchy`` may carry a
    precomputed ``naive_single_linkage(scores)``.
    """
    values, history = hierarchy if hierarchy is not None else naive_single_linkage(scores)
    size = 1
    for i, clustering in enumerate(history):
        if i + 1 < len(history) and history[i + 1].level == clustering.level:
            continue
        top = next(c for c in clustering.clusters if 0 in c)
        if len(top) <= max_size:
            size = len(top)
    gap = float(values[size - 1] - values[size]) if size < values.size else 0.0
    return size, gap
