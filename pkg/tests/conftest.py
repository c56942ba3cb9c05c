import numpy as np
import pytest

from scoreattack.corpus import Corpus, Vocabulary, synthetic_corpus


def make_corpus(keyword_sets, name="toy"):
    return Corpus([(f"d{i}", frozenset(kws)) for i, kws in enumerate(keyword_sets)], name=name)


@pytest.fixture
def toy_corpus():
    return make_corpus([{"a", "b"}, {"a"}, {"b", "c"}, {"a", "b", "c"}])


@pytest.fixture(scope="session")
def small_synthetic():
    return synthetic_corpus(n_docs=800, vocab_size=120, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_bits(rng, n, m, density=0.3):
    return rng.random((n, m)) < density


def vocab_of(m):
    return Vocabulary([f"k{j}" for j in range(m)])


VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
