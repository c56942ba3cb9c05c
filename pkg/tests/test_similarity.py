import numpy as np
import pytest

from scoreattack.corpus import Vocabulary, extract_vocabulary, split_corpus, subsample
from scoreattack.similarity import epsilon_similarity, sim_matrix

from conftest import make_corpus


def test_sim_matrix_examples(small_synthetic):
    d1, d2 = make_corpus([{"a", "b"}]), make_corpus([{"a"}])
    np.testing.assert_allclose(sim_matrix(d1, d2, Vocabulary(["a", "b"])), [[0, 1], [1, 1]])
    vocab = extract_vocabulary(small_synthetic, 40)
    assert not sim_matrix(small_synthetic, small_synthetic, vocab).any()
    real, sim = split_corpus(small_synthetic, 0.6, seed=0)
    np.testing.assert_allclose(sim_matrix(real, sim, vocab), -sim_matrix(sim, real, vocab))
    with pytest.raises(ValueError):
        sim_matrix(make_corpus([]), d2, Vocabulary(["a"]))


def test_epsilon_properties(small_synthetic):
    vocab = extract_vocabulary(small_synthetic, 40)
    real, sim = split_corpus(small_synthetic, 0.6, seed=1)
    assert epsilon_similarity(small_synthetic, small_synthetic, vocab).epsilon == 0
    e12 = epsilon_similarity(real, sim, vocab)
    e21 = epsilon_similarity(sim, real, vocab)
    assert e12.epsilon == pytest.approx(e21.epsilon) and e12.epsilon > 0
    assert 0 <= e12.vocab_overlap <= 1


def test_vocab_overlap():
    d_sim = make_corpus([{"a", "b"}])
    d_real = make_corpus([{"a", "c"}, {"d"}])
    report = epsilon_similarity(d_sim, d_real, Vocabulary(["a", "c", "d", "b"]))
    assert report.vocab_overlap == 0.5
    narrowed = epsilon_similarity(d_sim, d_real, Vocabulary(["a", "c"]), Vocabulary(["a"]))
    assert narrowed.vocab_overlap == 0.5


def test_epsilon_grows_as_attacker_set_shrinks(small_synthetic):
    vocab = extract_vocabulary(small_synthetic, 60)
    means = []
    for size in (40, 80, 160, 320):
        eps = []
        for seed in range(10):
            real, sim = split_corpus(small_synthetic, 0.6, seed=seed)
            eps.append(epsilon_similarity(subsample(sim, size, seed=seed), real, vocab).epsilon)
        means.append(np.mean(eps))
    assert all(a >= b for a, b in zip(means, means[1:]))
