import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scoreattack.countermeasures import (CHEN_P, CHEN_Q, CountermeasureConfig, Obfuscation,
                                         Padding, entry_overhead, obfuscate_index, pad_index)
from scoreattack.index import IndexMatrix

from conftest import random_bits, vocab_of


def _index(bits):
    return IndexMatrix(bits, vocab_of(bits.shape[1]))


def test_pad_examples():
    bits = np.zeros((2000, 3), dtype=bool)
    bits[:480, 0] = True
    bits[:1000, 1] = True
    padded = pad_index(_index(bits), 500, seed=1)
    counts = padded.column_counts()
    assert counts[0] == 500
    assert counts[1] == 1000  # already aligned
    assert counts[2] == 0
    np.testing.assert_array_equal(padded.bits[:, 1], bits[:, 1])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(1, 8), st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_pad_invariants(n, m, n_pad, seed):
    bits = random_bits(np.random.default_rng(seed), n, m)
    padded = pad_index(_index(bits), n_pad, seed=seed)
    assert np.all(padded.bits[bits])  # superset
    for before, after in zip(bits.sum(axis=0), padded.column_counts()):
        assert after == n or after % n_pad == 0
        assert after >= before


def test_pad_saturation_warning(caplog):
    bits = np.zeros((10, 2), dtype=bool)
    bits[:3, 0] = True
    with caplog.at_level(logging.WARNING):
        padded = pad_index(_index(bits), 500, seed=0)
    assert padded.bits[:, 0].all()
    assert "saturated 1" in caplog.text


def test_pad_deterministic_and_validated(rng):
    index = _index(random_bits(rng, 200, 10))
    a = pad_index(index, 30, seed=5)
    np.testing.assert_array_equal(a.bits, pad_index(index, 30, seed=5).bits)
    assert not np.array_equal(a.bits, pad_index(index, 30, seed=6).bits)
    with pytest.raises(ValueError):
        pad_index(index, 0)


def test_obfuscation_identity_and_zero(rng):
    index = _index(random_bits(rng, 100, 10))
    np.testing.assert_array_equal(obfuscate_index(index, 1, 0, seed=1).bits, index.bits)
    assert not obfuscate_index(index, 0, 0, seed=1).bits.any()
    with pytest.raises(ValueError):
        obfuscate_index(index, 1.2, 0)


def test_obfuscation_binomial_rates(rng):
    bits = random_bits(rng, 1000, 100)
    out = obfuscate_index(_index(bits), 0.9, 0.05, seed=11).bits
    ones, zeros = bits.sum(), (~bits).sum()
    kept = out[bits].sum() / ones
    added = out[~bits].sum() / zeros
    assert abs(kept - 0.9) <= 3 * math.sqrt(0.9 * 0.1 / ones)
    assert abs(added - 0.05) <= 3 * math.sqrt(0.05 * 0.95 / zeros)


def test_per_column_streams_are_independent_of_width(rng):
    # a column's noise depends only on (seed, column), not on the other columns
    bits = random_bits(rng, 300, 6)
    full = obfuscate_index(_index(bits), CHEN_P, CHEN_Q, seed=3).bits
    part = obfuscate_index(_index(bits[:, :4]), CHEN_P, CHEN_Q, seed=3).bits
    np.testing.assert_array_equal(full[:, :4], part)


def test_entry_overhead(rng):
    bits = np.zeros((100, 2), dtype=bool)
    bits[:40, 0] = True
    bits[:60, 1] = True
    assert entry_overhead(_index(bits), pad_index(_index(bits), 50, seed=0)) == pytest.approx(0.5)


def test_config_and_transformers(rng):
    index = _index(random_bits(rng, 120, 5))
    assert CountermeasureConfig().apply(index) is index
    cfg = CountermeasureConfig("padding", n_pad=40, seed=2)
    np.testing.assert_array_equal(cfg.apply(index).bits, Padding(40, random_state=2).fit_transform(index).bits)
    cfg = CountermeasureConfig("obfuscation", p=0.8, q=0.1, seed=4)
    np.testing.assert_array_equal(cfg.apply(index).bits,
                                  Obfuscation(0.8, 0.1, random_state=4).fit_transform(index).bits)
    assert Obfuscation().get_params() == {"p": CHEN_P, "q": CHEN_Q, "random_state": None}
    for bad in (dict(kind="shuffle"), dict(n_pad=0), dict(p=-0.1), dict(q=2)):
        with pytest.raises(ValueError):
            CountermeasureConfig(**bad)
