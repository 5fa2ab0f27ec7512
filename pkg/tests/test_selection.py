import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from byzsgd.errors import InvalidInputError
from byzsgd.selection import rank_window_mask, select_kth, select_kth_columns


def test_small_examples():
    assert select_kth([3, 1, 2], 2) == 2
    assert select_kth([2, 2, 1], 3) == 2


def test_matches_full_sort_on_large_input():
    values = np.random.default_rng(0).random(10_000)
    ordered = np.sort(values)
    for k in (1, 17, 5000, 9999, 10_000):
        assert select_kth(values, k) == ordered[k - 1]


@pytest.mark.parametrize("k", [0, 4, -1])
def test_rank_out_of_range(k):
    with pytest.raises(InvalidInputError):
        select_kth([1.0, 2.0, 3.0], k)


def test_nan_sorts_above_infinity():
    values = [math.nan, math.inf, 1.0]
    assert select_kth(values, 2) == math.inf
    assert math.isnan(select_kth(values, 3))


finite_or_inf = st.one_of(
    st.floats(allow_nan=False, width=64),
    st.sampled_from([0.0, -0.0, 1.0, -1.0]),
)


@given(st.lists(finite_or_inf, min_size=1, max_size=40), st.data())
def test_select_kth_equals_sorted(values, data):
    k = data.draw(st.integers(1, len(values)))
    assert select_kth(values, k) == sorted(values)[k - 1]


def test_columns_match_sort():
    batch = np.random.default_rng(1).integers(-2, 3, size=(9, 30)).astype(float)
    out = select_kth_columns(batch, [1, 5, 9])
    ordered = np.sort(batch, axis=0)
    assert np.array_equal(out, ordered[[0, 4, 8]])


def _stable_rank_mask(keys, start, stop):
    m, d = keys.shape
    mask = np.zeros_like(keys, dtype=bool)
    for j in range(d):
        order = sorted(range(m), key=lambda i: (math.isnan(keys[i, j]), 0.0 if math.isnan(keys[i, j]) else keys[i, j], i))
        mask[order[start:stop], j] = True
    return mask


@given(st.data())
def test_rank_window_is_stable_sort_window(data):
    m = data.draw(st.integers(1, 12))
    d = data.draw(st.integers(1, 6))
    cells = st.sampled_from([0.0, 1.0, 2.0, -1.0, math.inf, -math.inf, math.nan])
    keys = np.array(data.draw(st.lists(st.lists(cells, min_size=d, max_size=d), min_size=m, max_size=m)))
    start = data.draw(st.integers(0, m - 1))
    stop = data.draw(st.integers(start + 1, m))
    mask = rank_window_mask(keys, start, stop)
    assert np.array_equal(mask, _stable_rank_mask(keys, start, stop))
    assert np.all(mask.sum(axis=0) == stop - start)


def test_rank_window_rejects_empty_window():
    with pytest.raises(InvalidInputError):
        rank_window_mask(np.zeros((3, 1)), 2, 2)
