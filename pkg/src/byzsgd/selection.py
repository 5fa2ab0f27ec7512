"""Order-statistic selection.

Scalars are ordered by the IEEE total order restricted to what matters here:
``-inf < finite < +inf < nan``.  NaN payloads and the sign of zero are not
distinguished (``-0.0`` and ``0.0`` are ties).
"""

from __future__ import annotations

import math
import random
from collections.abc import Sequence

import numpy as np

from .errors import InvalidInputError

# fixed pivot stream: results never depend on it, only running time does
_PIVOTS = random.Random(0x5E1EC7)


def select_kth(values: Sequence[float], k: int) -> float:
    """Return the ``k``-th smallest element (1-based, counting multiplicity).

    Quickselect with random pivots and three-way partitioning, so runs of
    duplicates cost nothing extra.  Expected linear time.

    >>> select_kth([3.0, 1.0, 2.0], 2)
    2.0
    """
    items = [float(v) for v in values]
    n = len(items)
    if not 1 <= k <= n:
        raise InvalidInputError(f"rank k={k} outside 1..{n}")
    finite = [v for v in items if not math.isnan(v)]
    if k > len(finite):
        return math.nan
    k -= 1  # 0-based from here on
    while True:
        if len(finite) == 1:
            return finite[0]
        pivot = finite[_PIVOTS.randrange(len(finite))]
        lower = [v for v in finite if v < pivot]
        if k < len(lower):
            finite = lower
            continue
        n_equal = sum(1 for v in finite if v == pivot)
        if k < len(lower) + n_equal:
            return pivot
        k -= len(lower) + n_equal
        finite = [v for v in finite if v > pivot]


def select_kth_columns(batch: np.ndarray, ranks: Sequence[int]) -> np.ndarray:
    """Column-wise order statistics of an ``m x d`` matrix.

    ``ranks`` are 1-based.  Returns an array of shape ``(len(ranks), d)``.
    Backed by ``np.partition`` (introselect), which sorts NaN last, matching
    the total order above.
    """
    m = batch.shape[0]
    kth = [r - 1 for r in ranks]
    if any(not 0 <= r < m for r in kth):
        raise InvalidInputError(f"ranks {list(ranks)} outside 1..{m}")
    part = np.partition(batch, sorted(set(kth)), axis=0)
    return part[kth]


def total_less(a, b):
    """Elementwise ``a < b`` under the NaN-largest total order."""
    return (a < b) | (~np.isnan(a) & np.isnan(b))


def total_equal(a, b):
    """Elementwise tie test under the NaN-largest total order."""
    return (a == b) | (np.isnan(a) & np.isnan(b))


def rank_window_mask(keys: np.ndarray, start: int, stop: int) -> np.ndarray:
    """Mark, per column, the entries whose stable rank lies in ``[start, stop)``.

    Ranks are 0-based positions in a stable ascending sort of each column, so
    ties are ordered by row index.  Exactly ``stop - start`` entries are
    marked in every column.  Runs in linear time per column: two selections
    plus counting of the entries tied with each threshold.
    """
    m = keys.shape[0]
    if not 0 <= start < stop <= m:
        raise InvalidInputError(f"rank window [{start}, {stop}) invalid for m={m}")
    if start == 0 and stop == m:
        return np.ones(keys.shape, dtype=bool)
    lo, hi = select_kth_columns(keys, [start + 1, stop])
    keep = ~total_less(keys, lo) & ~total_less(hi, keys)
    # columns with ties straddling a threshold keep too many entries
    crowded = np.flatnonzero(keep.sum(axis=0) != stop - start)
    if crowded.size:
        sub = keys[:, crowded]
        lo, hi = lo[crowded], hi[crowded]
        below_lo = total_less(sub, lo)
        below_hi = total_less(sub, hi)
        at_lo = total_equal(sub, lo)
        at_hi = total_equal(sub, hi)
        fixed = ~below_lo & (at_hi | below_hi)
        # a tied entry's position inside its tie group, 1-based, in row order
        pos_lo = np.cumsum(at_lo, axis=0)
        pos_hi = np.cumsum(at_hi, axis=0)
        fixed &= ~(at_lo & (pos_lo <= start - below_lo.sum(axis=0)))
        fixed &= ~(at_hi & (pos_hi > stop - below_hi.sum(axis=0)))
        keep[:, crowded] = fixed
    return keep
