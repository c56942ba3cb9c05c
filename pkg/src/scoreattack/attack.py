"""Score attack and refined score attack on access-pattern leakage.

Keywords and trapdoors are described by their co-occurrence with the known
queries; a trapdoor is matched to the keyword whose description is closest,
scored as ``-ln(distance)``. The refined attack repeatedly promotes its most
certain predictions to known queries and rescores.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .clustering import max_gap_cut
from .corpus import Corpus, Vocabulary
from .index import DEFAULT_MEMORY_BUDGET, CoocTensor, IndexMatrix, cooccurrence
from .sse import LabeledQueryLog, QueryLog, trapdoor_cooccurrence

logger = logging.getLogger(__name__)

DIST_FLOOR = 1e-20
SCORE_CEILING = -np.log(DIST_FLOOR)
NORMS = {"l2": "euclidean", "l1": "cityblock", "linf": "chebyshev"}
ATTACKER_MODELS = ("honest_server", "traffic_observer")


@dataclass(frozen=True)
class AttackConfig:
    norm: str = "l2"
    ref_speed: int = 10
    order: int = 2
    attacker_model: str = "honest_server"
    max_cluster_size: int | None = None

    def __post_init__(self):
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm {self.norm!r}; expected one of {sorted(NORMS)}")
        if self.ref_speed < 1:
            raise ValueError(f"ref_speed must be >= 1, got {self.ref_speed}")
        if self.order < 2:
            raise ValueError(f"order must be >= 2, got {self.order}")
        if self.attacker_model not in ATTACKER_MODELS:
            raise ValueError(f"unknown attacker model {self.attacker_model!r}")
        if self.max_cluster_size is not None and self.max_cluster_size < 1:
            raise ValueError(f"max_cluster_size must be >= 1, got {self.max_cluster_size}")


@dataclass(frozen=True)
class Prediction:
    trapdoor: str
    keywords: tuple[str, ...]  # best candidate first; several under clustering
    score: float
    certainty: float
    iteration: int | None = None  # refinement round in which it was promoted

    @property
    def keyword(self) -> str:
        return self.keywords[0]


@dataclass
class SubMatrices:
    """Keyword and trapdoor signatures restricted to the known queries.

    Row i of ``kw_side`` describes keyword i; row j of ``td_side`` describes
    trapdoor j. For order d > 2 each row is the flattened (d-1)-axis slice
    over known-query tuples in lexicographic order.
    """

    kw_side: np.ndarray
    td_side: np.ndarray
    known_order: list[tuple[str, str]]


def estimate_n_real(log: QueryLog, d_sim: Corpus | IndexMatrix) -> float:
    """Estimate the number of indexed documents from the known queries.

    Averages ``|R_td| / |D_sim(kw)|`` over the known pairs and scales by the
    size of the similar set. Pairs whose keyword never occurs in ``d_sim``
    are skipped.
    """
    if isinstance(d_sim, IndexMatrix):
        freq = dict(zip(d_sim.vocab, d_sim.column_counts().tolist()))
        return _estimate_from_frequencies(log, freq, d_sim.n)
    return _estimate_from_frequencies(log, d_sim.document_frequencies(), len(d_sim))


def _estimate_from_frequencies(log: QueryLog, freq, n_sim: int) -> float:
    ratios = []
    for td, kw in log.known:
        in_sim = freq.get(kw, 0)
        if in_sim == 0:
            logger.debug("known keyword %r absent from the similar documents; skipped", kw)
            continue
        ratios.append(log.responses[log.pos(td)].size / in_sim)
    if not ratios:
        raise ValueError("no known query has its keyword in the similar documents")
    return float(np.mean(ratios) * n_sim)


def _project(values: np.ndarray, cols: Sequence[int]) -> np.ndarray:
    cols = np.asarray(cols, dtype=np.intp)
    out = values
    for axis in range(1, values.ndim):
        out = np.take(out, cols, axis=axis)
    return out.reshape(values.shape[0], -1)


def project_submatrices(c_kw: CoocTensor, c_td: CoocTensor, known: Sequence[tuple[str, str]],
                        vocab: Vocabulary, queries: Sequence[str]) -> SubMatrices:
    if c_kw.order != c_td.order:
        raise ValueError(f"order mismatch: keyword side {c_kw.order}, trapdoor side {c_td.order}")
    td_pos = {td: i for i, td in enumerate(queries)}
    kw_cols, td_cols = [], []
    for td, kw in known:
        if kw not in vocab:
            raise KeyError(f"known pair ({td!r}, {kw!r}): keyword not in the attacker vocabulary")
        if td not in td_pos:
            raise KeyError(f"known pair ({td!r}, {kw!r}): trapdoor was not observed")
        kw_cols.append(vocab.pos(kw))
        td_cols.append(td_pos[td])
    return SubMatrices(_project(c_kw.values, kw_cols), _project(c_td.values, td_cols), list(known))


def matching_score(sub: SubMatrices, td: int, kw: int, norm: str = "l2") -> float:
    """``-ln`` of the distance between trapdoor ``td`` and keyword ``kw``."""
    dist = cdist(sub.td_side[td:td + 1], sub.kw_side[kw:kw + 1], metric=NORMS[norm])[0, 0]
    return float(-np.log(max(dist, DIST_FLOOR)))


def score_matrix(sub: SubMatrices, rows: Sequence[int] | None = None, norm: str = "l2") -> np.ndarray:
    """Scores of the selected trapdoor rows against every keyword."""
    td_side = sub.td_side if rows is None else sub.td_side[np.asarray(rows, dtype=np.intp)]
    if td_side.shape[0] == 0:
        return np.zeros((0, sub.kw_side.shape[0]))
    dist = cdist(td_side, sub.kw_side, metric=NORMS[norm])
    return -np.log(np.maximum(dist, DIST_FLOOR))


def certainty(scores: Sequence[float]) -> float:
    """Gap between the best and the second-best score (``inf`` with one candidate)."""
    values = np.asarray(scores, dtype=np.float64)
    if values.size < 2:
        return float("inf")
    top2 = np.partition(values, values.size - 2)[-2:]
    return float(top2[1] - top2[0])


def _rank_row(row: np.ndarray, max_cluster_size: int | None):
    """(candidate indices, best score, certainty) for one trapdoor's scores."""
    best = int(np.argmax(row))
    if row.size < 2:
        return [best], float(row[best]), float("inf")
    if not max_cluster_size:
        return [best], float(row[best]), certainty(row)
    limit = min(max_cluster_size, row.size - 1)
    # ties keep the lower vocabulary index first
    top = np.lexsort((np.arange(row.size), -row))[: limit + 1]
    size, gap = max_gap_cut(row[top], limit)
    return [int(i) for i in top[:size]], float(row[best]), gap


def _predict_rows(scores: np.ndarray, rows: Sequence[int], queries: Sequence[str],
                  vocab: Vocabulary, max_cluster_size: int | None) -> list[Prediction]:
    preds = []
    for r, td_index in enumerate(rows):
        cands, best, cert = _rank_row(scores[r], max_cluster_size)
        preds.append(Prediction(queries[td_index], tuple(vocab[c] for c in cands), best, cert))
    return preds


def base_score_attack(sub: SubMatrices, vocab: Vocabulary, queries: Sequence[str],
                      norm: str = "l2", max_cluster_size: int | None = None) -> list[Prediction]:
    """Best keyword (or best-candidate cluster) for every unknown trapdoor."""
    if not sub.known_order:
        raise ValueError("the score attack needs at least one known query")
    known = {td for td, _ in sub.known_order}
    rows = [i for i, td in enumerate(queries) if td not in known]
    scores = score_matrix(sub, rows, norm)
    return _predict_rows(scores, rows, queries, vocab, max_cluster_size)


def refined_score_attack(c_kw: CoocTensor, c_td: CoocTensor, vocab: Vocabulary,
                         queries: Sequence[str], known: Sequence[tuple[str, str]],
                         cfg: AttackConfig = AttackConfig()) -> list[Prediction]:
    """Iteratively promote the ``ref_speed`` most certain predictions to known queries.

    Stops once fewer than ``ref_speed`` trapdoors are promotable (all unknown
    trapdoors; only single-keyword clusters when clustering is on) and returns
    the promoted predictions followed by the last round's predictions.
    """
    if not known:
        raise ValueError("the refined score attack needs at least one known query")
    known = list(known)
    promoted: list[Prediction] = []
    iteration = 0
    while True:
        known_tds = {td for td, _ in known}
        rows = [i for i, td in enumerate(queries) if td not in known_tds]
        sub = project_submatrices(c_kw, c_td, known, vocab, queries)
        scores = score_matrix(sub, rows, cfg.norm)
        preds = _predict_rows(scores, rows, queries, vocab, cfg.max_cluster_size)
        eligible = [i for i, p in enumerate(preds) if len(p.keywords) == 1]
        if len(eligible) < cfg.ref_speed:
            return promoted + preds
        # stable sort: equal certainty keeps the earlier trapdoor in the query list
        ranked = sorted(eligible, key=lambda i: -preds[i].certainty)[: cfg.ref_speed]
        for i in sorted(ranked):
            p = preds[i]
            promoted.append(Prediction(p.trapdoor, p.keywords, p.score, p.certainty, iteration))
            known.append((p.trapdoor, p.keyword))
        logger.debug("round %d: promoted %d, %d unknown left", iteration, len(ranked),
                     len(rows) - len(ranked))
        iteration += 1


def accuracy(predictions: Sequence[Prediction], log: LabeledQueryLog,
             initially_known: Sequence[str] | None = None) -> float:
    """Share of unknown queries whose prediction contains the true keyword.

    The denominator is the number of observed queries minus the initially known ones.
    """
    excluded = set(log.known_trapdoors if initially_known is None else initially_known)
    unknown = [td for td in log.queries if td not in excluded]
    if not unknown:
        return float("nan")
    by_td = {p.trapdoor: p for p in predictions}
    correct = sum(1 for td in unknown if td in by_td and log.truth[td] in by_td[td].keywords)
    return correct / len(unknown)


PREDICTION_COLUMNS = ["trapdoor_id", "predicted_keywords", "score", "certainty",
                      "iteration_promoted", "is_initially_known"]


def dump_predictions(predictions: Sequence[Prediction], log: QueryLog, path) -> None:
    """CSV with one row per observed trapdoor, in query order.

    Initially known trapdoors carry their known keyword and empty scores.
    Multiple cluster members are joined with ``|``.
    """
    by_td = {p.trapdoor: p for p in predictions}
    known = dict(log.known)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTION_COLUMNS)
        for td in log.queries:
            if td in known:
                writer.writerow([td, known[td], "", "", "", 1])
                continue
            p = by_td.get(td)
            if p is None:
                writer.writerow([td, "", "", "", "", 0])
                continue
            writer.writerow([td, "|".join(p.keywords), repr(p.score), repr(p.certainty),
                             "" if p.iteration is None else p.iteration, 0])


class ScoreAttack(BaseEstimator):
    """Score attack as an estimator.

    ``fit`` takes the attacker's similar-document index (an ``IndexMatrix``,
    or a binary documents x keywords array plus ``vocabulary``); ``predict``
    takes the observed ``QueryLog`` with its known pairs.
    """

    def __init__(self, norm="l2", order=2, attacker_model="honest_server",
                 max_cluster_size=None, memory_budget=DEFAULT_MEMORY_BUDGET):
        self.norm = norm
        self.order = order
        self.attacker_model = attacker_model
        self.max_cluster_size = max_cluster_size
        self.memory_budget = memory_budget

    def _config(self) -> AttackConfig:
        return AttackConfig(norm=self.norm, order=self.order, attacker_model=self.attacker_model,
                            max_cluster_size=self.max_cluster_size)

    def fit(self, X, y=None, vocabulary=None):
        self._config()
        if isinstance(X, IndexMatrix):
            index = X
        else:
            bits = check_array(X, dtype=bool, ensure_min_samples=1)
            if vocabulary is None:
                vocabulary = Vocabulary([f"kw{j}" for j in range(bits.shape[1])])
            elif not isinstance(vocabulary, Vocabulary):
                vocabulary = Vocabulary(vocabulary)
            index = IndexMatrix(bits, vocabulary)
        if index.n == 0:
            raise ValueError("cannot fit on an empty document set")
        self.vocabulary_ = index.vocab
        self.n_sim_ = index.n
        self.doc_counts_ = index.column_counts()
        self.keyword_cooc_ = cooccurrence(index, self.order, self.memory_budget)
        return self

    def _divisor(self, log: QueryLog) -> float:
        if self.attacker_model == "traffic_observer" or log.n_docs is None:
            freq = dict(zip(self.vocabulary_, self.doc_counts_.tolist()))
            return _estimate_from_frequencies(log, freq, self.n_sim_)
        return float(log.n_docs)

    def trapdoor_cooc(self, log: QueryLog) -> CoocTensor:
        check_is_fitted(self, "keyword_cooc_")
        return trapdoor_cooccurrence(log, self._divisor(log), self.order, self.memory_budget)

    def predict(self, log: QueryLog) -> list[Prediction]:
        check_is_fitted(self, "keyword_cooc_")
        log = log.redacted()
        sub = project_submatrices(self.keyword_cooc_, self.trapdoor_cooc(log), log.known,
                                  self.vocabulary_, log.queries)
        return base_score_attack(sub, self.vocabulary_, log.queries, self.norm,
                                 self.max_cluster_size)

    def score(self, log: LabeledQueryLog, y=None) -> float:
        """Accuracy over the queries that were not known beforehand."""
        return accuracy(self.predict(log), log)


class RefinedScoreAttack(ScoreAttack):
    def __init__(self, ref_speed=10, norm="l2", order=2, attacker_model="honest_server",
                 max_cluster_size=None, memory_budget=DEFAULT_MEMORY_BUDGET):
        super().__init__(norm=norm, order=order, attacker_model=attacker_model,
                         max_cluster_size=max_cluster_size, memory_budget=memory_budget)
        self.ref_speed = ref_speed

    def _config(self) -> AttackConfig:
        return AttackConfig(norm=self.norm, ref_speed=self.ref_speed, order=self.order,
                            attacker_model=self.attacker_model,
                            max_cluster_size=self.max_cluster_size)

    def predict(self, log: QueryLog) -> list[Prediction]:
        check_is_fitted(self, "keyword_cooc_")
        log = log.redacted()
        return refined_score_attack(self.keyword_cooc_, self.trapdoor_cooc(log), self.vocabulary_,
                                    log.queries, log.known, self._config())
