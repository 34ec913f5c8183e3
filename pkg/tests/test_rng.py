from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polymerlab.rng import GOLDEN, MASK64, as_seed, derive, mix64, split, split_u64, step_key

seeds = st.integers(0, 2 ** 64 - 1)


@given(seeds, st.integers(0, 10 ** 6))
def test_split_matches_compiled(seed, r):
    assert split(seed, r) == int(split_u64(np.uint64(seed), np.uint64(r)))


@given(seeds, st.integers(0, 10 ** 6))
def test_step_key_is_split(seed, step):
    assert int(step_key(np.uint64(seed), step)) == split(seed, step)


def test_split_distinct_streams():
    vals = {split(7, r) for r in range(10000)}
    assert len(vals) == 10000


def test_derive_is_iterated_split():
    assert derive(3, 1, 2) == split(split(3, 1), 2)
    assert derive(3) == 3


def test_mix64_range_and_bijective_sample():
    xs = [mix64(i * GOLDEN) for i in range(5000)]
    assert all(0 <= x <= MASK64 for x in xs)
    assert len(set(xs)) == len(xs)


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        as_seed(-1)
    with pytest.raises(ValueError):
        split(0, -1)
