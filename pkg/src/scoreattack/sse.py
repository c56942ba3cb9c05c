"""Simulated L1 SSE server: trapdoors, access patterns and query sampling."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .index import DEFAULT_MEMORY_BUDGET, CoocTensor, IndexMatrix, cooccurrence_counts

QUERYLOG_FORMAT = "scoreattack-querylog"
QUERYLOG_VERSION = 1
DISTRIBUTIONS = ("uniform", "zipfian", "inv_zipfian")
KNOWN_POLICIES = ("uniform", "top_quartile")


@dataclass(frozen=True)
class QueryDistribution:
    kind: str = "uniform"
    s: float = 1.0

    def __post_init__(self):
        if self.kind not in DISTRIBUTIONS:
            raise ValueError(f"unknown query distribution {self.kind!r}; expected one of {DISTRIBUTIONS}")
        if self.s != 1:
            raise ValueError("only the exponent s=1 is supported")

    def weights(self, N: int) -> np.ndarray:
        """pmf over ranks 1..N as an array."""
        ranks = np.arange(1, N + 1, dtype=np.float64)
        if self.kind == "uniform":
            return np.full(N, 1.0 / N)
        harmonic = np.sum(1.0 / ranks)
        if self.kind == "zipfian":
            return (1.0 / ranks) / harmonic
        return (1.0 / (N - ranks + 1)) / harmonic


def harmonic_number(N: int) -> float:
    return math.fsum(1.0 / n for n in range(1, N + 1))


def pmf(dist: QueryDistribution, k: int, N: int) -> float:
    """Probability of drawing the keyword of frequency rank ``k`` (1-based)."""
    if not 1 <= k <= N:
        raise ValueError(f"rank {k} outside 1..{N}")
    if dist.kind == "uniform":
        return 1.0 / N
    if dist.kind == "zipfian":
        return (1.0 / k) / harmonic_number(N)
    return (1.0 / (N - k + 1)) / harmonic_number(N)


@dataclass
class QueryLog:
    """What the attacker observes: trapdoors, their responses and known pairs.

    ``responses[i]`` holds the document identifiers (server row numbers)
    returned for ``queries[i]``; ``n_docs`` is the number of indexed documents,
    which only an honest-but-curious server learns.
    """

    queries: list[str]
    responses: list[np.ndarray]
    known: list[tuple[str, str]] = field(default_factory=list)
    n_docs: int | None = None

    def __post_init__(self):
        if len(set(self.queries)) != len(self.queries):
            raise ValueError("trapdoor tokens must be unique")
        if len(self.responses) != len(self.queries):
            raise ValueError("one response per trapdoor is required")
        self.responses = [np.asarray(r, dtype=np.int64) for r in self.responses]
        self._positions = {td: i for i, td in enumerate(self.queries)}
        for td, _ in self.known:
            if td not in self._positions:
                raise ValueError(f"known trapdoor {td!r} was not observed")

    def __len__(self) -> int:
        return len(self.queries)

    def pos(self, trapdoor: str) -> int:
        return self._positions[trapdoor]

    @property
    def known_trapdoors(self) -> set[str]:
        return {td for td, _ in self.known}

    def response_sizes(self) -> np.ndarray:
        return np.array([r.size for r in self.responses], dtype=np.int64)

    def redacted(self) -> "QueryLog":
        return QueryLog(list(self.queries), list(self.responses), list(self.known), self.n_docs)


@dataclass
class LabeledQueryLog(QueryLog):
    """A query log that also carries the hidden trapdoor -> keyword map.

    Only accuracy scoring should read ``truth``; attacks take ``redacted()``.
    """

    truth: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        super().__post_init__()
        missing = set(self.queries) - set(self.truth)
        if missing:
            raise ValueError(f"{len(missing)} trapdoors lack a ground-truth keyword")
        for td, kw in self.known:
            if self.truth[td] != kw:
                raise ValueError(f"known pair ({td!r}, {kw!r}) contradicts the ground truth")


def _draw_ranks(weights: np.ndarray, l: int, rng: np.random.Generator) -> np.ndarray:
    # numpy draws without replacement by repeatedly sampling the renormalised
    # pmf of the not-yet-drawn items, i.e. sequential rejection.
    return rng.choice(weights.size, size=l, replace=False, p=weights)


def _fresh_tokens(count: int, rng: np.random.Generator) -> list[str]:
    tokens: list[str] = []
    seen = set()
    while len(tokens) < count:
        tok = rng.bytes(12).hex()
        if tok not in seen:
            seen.add(tok)
            tokens.append(tok)
    return tokens


def sample_queries(vocab_real: Vocabulary, index_real: IndexMatrix,
                   dist: QueryDistribution | str = "uniform", l: int = 150,
                   seed=None) -> LabeledQueryLog:
    """Draw ``l`` distinct keywords by rank weight and answer their trapdoors.

    Ranks follow the vocabulary order (rank 1 is the most frequent keyword).
    Responses come from ``index_real``, which may carry a countermeasure.
    """
    if isinstance(dist, str):
        dist = QueryDistribution(dist)
    m_real = len(vocab_real)
    if l > m_real:
        raise ValueError(f"cannot draw l={l} distinct queries from m_real={m_real} keywords")
    rng = np.random.default_rng(seed)
    picked = _draw_ranks(dist.weights(m_real), l, rng)
    tokens = _fresh_tokens(l, rng)
    keywords = [vocab_real[int(j)] for j in picked]
    cols = [index_real.vocab.pos(kw) for kw in keywords]
    responses = [index_real.response(c) for c in cols]
    return LabeledQueryLog(tokens, responses, [], index_real.n,
                           truth=dict(zip(tokens, keywords)))


def select_known_queries(log: LabeledQueryLog, k: int, policy: str = "uniform", seed=None,
                         candidate_keywords=None) -> LabeledQueryLog:
    """Reveal ``k`` trapdoor-keyword pairs to the attacker.

    ``uniform`` picks among all queries; ``top_quartile`` among the
    ``ceil(l/4)`` queries with the largest responses. If ``candidate_keywords``
    is given, only queries whose keyword belongs to it are eligible (a known
    pair is only usable when the attacker's vocabulary contains its keyword).
    """
    if policy not in KNOWN_POLICIES:
        raise ValueError(f"unknown known-query policy {policy!r}; expected one of {KNOWN_POLICIES}")
    positions = np.arange(len(log))
    if policy == "top_quartile":
        sizes = log.response_sizes()
        order = np.argsort(-sizes, kind="stable")
        positions = np.sort(order[: math.ceil(len(log) / 4)])
    if candidate_keywords is not None:
        allowed = set(candidate_keywords)
        positions = np.array([p for p in positions if log.truth[log.queries[p]] in allowed],
                             dtype=np.int64)
    if k > positions.size:
        raise ValueError(f"cannot pick k={k} known queries from a pool of {positions.size}")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(positions, size=k, replace=False)) if k else []
    known = [(log.queries[p], log.truth[log.queries[p]]) for p in chosen]
    return LabeledQueryLog(list(log.queries), list(log.responses), known, log.n_docs,
                           truth=dict(log.truth))


def response_matrix(log: QueryLog) -> np.ndarray:
    """p x l incidence of the observed document identifiers and trapdoors."""
    if not len(log):
        return np.zeros((0, 0), dtype=bool)
    doc_ids = np.unique(np.concatenate(log.responses))
    out = np.zeros((doc_ids.size, len(log)), dtype=bool)
    for j, resp in enumerate(log.responses):
        out[np.searchsorted(doc_ids, resp), j] = True
    return out


def trapdoor_cooccurrence(log: QueryLog, n_divisor: float, order: int = 2,
                          memory_budget: int = DEFAULT_MEMORY_BUDGET) -> CoocTensor:
    if n_divisor <= 0:
        raise ValueError(f"n_divisor must be positive, got {n_divisor}")
    counts = cooccurrence_counts(response_matrix(log), order, memory_budget)
    return CoocTensor(counts / n_divisor, n_basis=n_divisor)


def save_querylog(log: QueryLog, path, redact: bool = True) -> None:
    """JSON-lines file: a header object, then one object per trapdoor."""
    labeled = isinstance(log, LabeledQueryLog) and not redact
    known = dict(log.known)
    with Path(path).open("w", encoding="utf-8") as fh:
        header = {"format": QUERYLOG_FORMAT, "version": QUERYLOG_VERSION,
                  "redacted": not labeled, "n_docs": log.n_docs}
        fh.write(json.dumps(header) + "\n")
        for td, resp in zip(log.queries, log.responses):
            row = {"trapdoor": td, "response": resp.tolist(), "known": known.get(td)}
            if labeled:
                row["truth"] = log.truth[td]
            fh.write(json.dumps(row) + "\n")


def load_querylog(path) -> QueryLog:
    with Path(path).open("r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != QUERYLOG_FORMAT or header.get("version") != QUERYLOG_VERSION:
            raise ValueError(f"{path} is not a v{QUERYLOG_VERSION} query log")
        rows = [json.loads(line) for line in fh if line.strip()]
    queries = [r["trapdoor"] for r in rows]
    responses = [np.asarray(r["response"], dtype=np.int64) for r in rows]
    known = [(r["trapdoor"], r["known"]) for r in rows if r["known"] is not None]
    if header["redacted"]:
        return QueryLog(queries, responses, known, header["n_docs"])
    truth = {r["trapdoor"]: r["truth"] for r in rows}
    return LabeledQueryLog(queries, responses, known, header["n_docs"], truth=truth)
