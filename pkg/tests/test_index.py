import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scoreattack.corpus import Vocabulary
from scoreattack.index import (IndexMatrix, MemoryBudgetExceeded, build_index, cooccurrence,
                               cooccurrence_counts, tensor_bytes)

from conftest import make_corpus, random_bits, vocab_of


def brute_force(bits, order):
    n, m = bits.shape
    out = np.zeros((m,) * order)
    for idx in itertools.product(range(m), repeat=order):
        out[idx] = np.all(bits[:, list(idx)], axis=1).sum()
    return out / n


def test_build_index_examples():
    corpus = make_corpus([{"a", "b"}, {"a"}])
    index = build_index(corpus, Vocabulary(["a", "b"]))
    np.testing.assert_array_equal(index.bits, [[1, 1], [1, 0]])
    assert index.doc_ids == ["d0", "d1"]
    empty = build_index(make_corpus([]), Vocabulary(["a", "b"]))
    assert empty.bits.shape == (0, 2)
    disjoint = build_index(corpus, Vocabulary(["x", "y"]))
    assert not disjoint.bits.any()


def test_cooccurrence_examples(toy_corpus):
    index = build_index(make_corpus([{"a", "b"}, {"a"}]), Vocabulary(["a", "b"]))
    c = cooccurrence(index, 2)
    np.testing.assert_allclose(c.values, [[1.0, 0.5], [0.5, 0.5]])
    assert c.order == 2 and c.dim == 2 and c.n_basis == 2

    idx3 = build_index(toy_corpus, Vocabulary(["a", "b", "c"]))
    c3 = cooccurrence(idx3, 3)
    assert c3.values[0, 1, 2] == pytest.approx(0.25)
    np.testing.assert_allclose(np.diag(cooccurrence(idx3, 2).values),
                               idx3.column_counts() / idx3.n)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.integers(1, 10), st.integers(0, 2**31 - 1), st.sampled_from([2, 3]))
def test_bruteforce_equivalence(n, m, seed, order):
    bits = random_bits(np.random.default_rng(seed), n, m, 0.4)
    got = cooccurrence(IndexMatrix(bits, vocab_of(m)), order).values
    np.testing.assert_allclose(got, brute_force(bits, order), rtol=0, atol=1e-12)


def test_order3_symmetry_and_marginals(rng):
    bits = random_bits(rng, 60, 8)
    index = IndexMatrix(bits, vocab_of(8))
    c2 = cooccurrence(index, 2).values
    c3 = cooccurrence(index, 3).values
    for perm in itertools.permutations(range(3)):
        np.testing.assert_array_equal(c3, np.transpose(c3, perm))
    assert np.all(c3.max(axis=2) <= c2 + 1e-15)
    for i, j in itertools.product(range(8), repeat=2):
        assert c3[i, j, j] == pytest.approx(c2[i, j])
    assert c3.min() >= 0 and c3.max() <= 1


def test_blocked_gram_matches_dense(rng):
    bits = random_bits(rng, 1000, 12)
    dense = bits.astype(float).T @ bits.astype(float)
    np.testing.assert_array_equal(cooccurrence_counts(bits, 2, block_size=37), dense)


def test_memory_budget():
    bits = np.zeros((3, 100), dtype=bool)
    assert tensor_bytes(100, 3) == 8 * 100**3
    with pytest.raises(MemoryBudgetExceeded) as info:
        cooccurrence_counts(bits, 3, memory_budget=1000)
    assert info.value.required == 8 * 100**3
    assert str(8 * 100**3) in str(info.value)


def test_order_validation(rng):
    with pytest.raises(ValueError):
        cooccurrence_counts(random_bits(rng, 4, 3), 1)


def test_index_helpers(rng):
    bits = random_bits(rng, 20, 5)
    index = IndexMatrix(bits, vocab_of(5))
    np.testing.assert_array_equal(index.response(2), np.flatnonzero(bits[:, 2]))
    np.testing.assert_array_equal(np.unpackbits(index.packed(), axis=1, count=5).astype(bool), bits)
    assert (index.n, index.m) == (20, 5)
