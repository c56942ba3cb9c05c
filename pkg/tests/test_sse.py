import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scoreattack.corpus import extract_vocabulary
from scoreattack.index import IndexMatrix, build_index, cooccurrence
from scoreattack.sse import (LabeledQueryLog, QueryDistribution, QueryLog, _draw_ranks,
                             harmonic_number, load_querylog, pmf, response_matrix,
                             sample_queries, save_querylog, select_known_queries,
                             trapdoor_cooccurrence)

from conftest import random_bits, vocab_of


def _setup(small_synthetic, m=60):
    vocab = extract_vocabulary(small_synthetic, m)
    return vocab, build_index(small_synthetic, vocab)


def test_pmf_examples():
    for k in range(1, 5):
        assert pmf(QueryDistribution("uniform"), k, 4) == 0.25
    assert pmf(QueryDistribution("zipfian"), 1, 2) == pytest.approx(2 / 3)
    assert pmf(QueryDistribution("inv_zipfian"), 1, 2) == pytest.approx(1 / 3)
    for k in (0, 5):
        with pytest.raises(ValueError):
            pmf(QueryDistribution("zipfian"), k, 4)


@pytest.mark.parametrize("kind", ["uniform", "zipfian", "inv_zipfian"])
def test_pmf_normalisation(kind):
    dist = QueryDistribution(kind)
    for N in (1, 2, 3, 10, 137, 1000, 10_000):
        assert abs(math.fsum(dist.weights(N)) - 1) <= 1e-12
    assert abs(math.fsum(pmf(dist, k, 500) for k in range(1, 501)) - 1) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 2000), st.data())
def test_reflection_identity(N, data):
    k = data.draw(st.integers(1, N))
    assert pmf(QueryDistribution("inv_zipfian"), k, N) == pmf(QueryDistribution("zipfian"), N - k + 1, N)


def test_distribution_validation():
    with pytest.raises(ValueError):
        QueryDistribution("pareto")
    with pytest.raises(ValueError):
        QueryDistribution("zipfian", s=2)
    assert harmonic_number(2) == 1.5


def test_zipf_top_rank_frequency():
    # single draws from a 200-keyword vocabulary: rank 1 must appear with prob 1/H_N
    N, draws = 200, 100_000
    vocab = vocab_of(N)
    index = IndexMatrix(np.eye(N, dtype=bool), vocab)
    rng = np.random.default_rng(2024)
    weights = QueryDistribution("zipfian").weights(N)
    hits = sum(_draw_ranks(weights, 1, rng)[0] == 0 for _ in range(draws))
    p = 1 / harmonic_number(N)
    assert abs(hits / draws - p) <= 3 * math.sqrt(p * (1 - p) / draws)
    log = sample_queries(vocab, index, "zipfian", 1, seed=0)
    assert len(log) == 1


def test_sample_queries_exhaustive_and_responses(small_synthetic):
    vocab, index = _setup(small_synthetic)
    log = sample_queries(vocab, index, "uniform", len(vocab), seed=4)
    assert sorted(log.truth.values()) == sorted(vocab)
    for td, resp in zip(log.queries, log.responses):
        np.testing.assert_array_equal(resp, np.flatnonzero(index.bits[:, vocab.pos(log.truth[td])]))
    assert log.n_docs == index.n
    with pytest.raises(ValueError, match="l=61"):
        sample_queries(vocab, index, "uniform", 61)


def test_sample_queries_deterministic(small_synthetic):
    vocab, index = _setup(small_synthetic)
    a = sample_queries(vocab, index, "zipfian", 20, seed=8)
    b = sample_queries(vocab, index, "zipfian", 20, seed=8)
    assert a.queries == b.queries and a.truth == b.truth
    c = sample_queries(vocab, index, "zipfian", 20, seed=9)
    assert set(c.queries).isdisjoint(a.queries)


def test_tokens_do_not_change_structure(small_synthetic):
    vocab, index = _setup(small_synthetic)
    a = sample_queries(vocab, index, "uniform", len(vocab), seed=1)
    b = sample_queries(vocab, index, "uniform", len(vocab), seed=2)
    by_kw_a = {a.truth[td]: r.tolist() for td, r in zip(a.queries, a.responses)}
    by_kw_b = {b.truth[td]: r.tolist() for td, r in zip(b.queries, b.responses)}
    assert by_kw_a == by_kw_b


def _log_with_sizes(sizes):
    queries = [f"t{i}" for i in range(len(sizes))]
    responses = [np.arange(s) for s in sizes]
    return LabeledQueryLog(queries, responses, [], 100,
                           truth={q: f"k{i}" for i, q in enumerate(queries)})


def test_select_known_examples():
    log = _log_with_sizes([3, 9, 1, 4, 7, 2, 5, 6])
    for seed in range(20):
        picked = select_known_queries(log, 2, "top_quartile", seed=seed)
        assert picked.known_trapdoors == {"t1", "t4"}
    full = select_known_queries(log, 8, "uniform", seed=0)
    assert full.known_trapdoors == set(log.queries)
    assert all(log.truth[td] == kw for td, kw in full.known)
    a = select_known_queries(log, 3, "uniform", seed=5)
    assert a.known == select_known_queries(log, 3, "uniform", seed=5).known
    with pytest.raises(ValueError):
        select_known_queries(log, 3, "top_quartile", seed=0)
    with pytest.raises(ValueError):
        select_known_queries(log, 1, "bogus")


def test_select_known_restricted_pool():
    log = _log_with_sizes([1, 2, 3, 4])
    picked = select_known_queries(log, 2, "uniform", seed=0, candidate_keywords={"k0", "k3"})
    assert picked.known_trapdoors == {"t0", "t3"}


def test_querylog_validation():
    with pytest.raises(ValueError):
        QueryLog(["a", "a"], [[0], [1]])
    with pytest.raises(ValueError):
        QueryLog(["a"], [[0]], known=[("b", "x")])
    with pytest.raises(ValueError):
        LabeledQueryLog(["a"], [[0]], [("a", "wrong")], truth={"a": "right"})
    redacted = LabeledQueryLog(["a"], [[0]], truth={"a": "x"}).redacted()
    assert not hasattr(redacted, "truth")


def test_trapdoor_cooccurrence_examples(rng):
    log = QueryLog(["a", "b"], [[0, 1], [2, 3]])
    c = trapdoor_cooccurrence(log, 4)
    assert c.values[0, 1] == 0
    single = QueryLog(["a"], [np.arange(7)])
    assert trapdoor_cooccurrence(single, 14).values[0, 0] == 0.5
    with pytest.raises(ValueError):
        trapdoor_cooccurrence(single, 0)


@pytest.mark.parametrize("order", [2, 3])
def test_trapdoor_cooccurrence_matches_index(order, rng):
    bits = random_bits(rng, 40, 9)
    bits[:, 4] = False  # a keyword nobody mentions still gets queried
    vocab = vocab_of(9)
    index = IndexMatrix(bits, vocab)
    log = sample_queries(vocab, index, "uniform", 6, seed=3)
    cols = [vocab.pos(log.truth[td]) for td in log.queries]
    expected = cooccurrence(index, order).values[np.ix_(*[cols] * order)]
    got = trapdoor_cooccurrence(log, index.n, order).values
    np.testing.assert_array_equal(got, expected)
    assert response_matrix(log).shape[1] == 6


def test_querylog_roundtrip(tmp_path, small_synthetic):
    vocab, index = _setup(small_synthetic)
    log = select_known_queries(sample_queries(vocab, index, "uniform", 15, seed=1), 4, seed=2)
    path = tmp_path / "q.jsonl"
    save_querylog(log, path, redact=False)
    back = load_querylog(path)
    assert isinstance(back, LabeledQueryLog) and back.truth == log.truth
    assert back.known == log.known and back.n_docs == log.n_docs
    save_querylog(log, path, redact=True)
    back = load_querylog(path)
    assert not isinstance(back, LabeledQueryLog)
    assert all(np.array_equal(x, y) for x, y in zip(back.responses, log.responses))
    assert '"truth"' not in path.read_text()
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"format": "other"}\n')
    with pytest.raises(ValueError):
        load_querylog(bad)
