"""Slow reference implementations used as ground truth in tests.

Everything here works one scalar at a time with Python sorts.  Nothing in the
library's fast path imports this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aggregation import AggregationOutput, as_batch, max_trim
from .errors import ConstraintError, InvalidInputError


def _order_key(value: float):
    return (1, 0.0) if math.isnan(value) else (0, value)


def _index_order_mean(column, kept) -> float:
    acc = 0.0
    for i in sorted(kept):
        acc += column[i]
    return acc / len(kept)


def _trimmed_column(column, b: int) -> float:
    m = len(column)
    order = sorted(range(m), key=lambda i: (_order_key(column[i]), i))
    return _index_order_mean(column, order[b : m - b])


def sort_trimmed_mean(batch, b: int) -> np.ndarray:
    """Trimmed mean by full stable sort of every coordinate."""
    batch = as_batch(batch)
    m, d = batch.shape
    if not 0 <= b <= max_trim(m):
        raise ConstraintError(f"trim count b={b} out of range for m={m}")
    cols = batch.T.tolist()
    return np.array([_trimmed_column(cols[j], b) for j in range(d)])


def brute_phocas(batch, b: int) -> np.ndarray:
    """Phocas by sorting (distance, worker index) pairs per coordinate."""
    batch = as_batch(batch)
    m, d = batch.shape
    if not 0 <= b <= max_trim(m):
        raise ConstraintError(f"trim count b={b} out of range for m={m}")
    out = []
    for column in batch.T.tolist():
        centre = _trimmed_column(column, b)
        pairs = sorted((_order_key(abs(u - centre)), i) for i, u in enumerate(column))
        out.append(_index_order_mean(column, [i for _, i in pairs[: m - b]]))
    return np.array(out)


def brute_krum(batch, q: int) -> AggregationOutput:
    """Krum from the full distance matrix, one pair at a time."""
    batch = as_batch(batch)
    m = batch.shape[0]
    if q < 0 or 2 * q + 2 >= m:
        raise ConstraintError(f"krum needs 2q+2 < m, got q={q}, m={m}")
    dist = [[0.0] * m for _ in range(m)]
    with np.errstate(invalid="ignore", over="ignore"):
        for i in range(m):
            for j in range(m):
                diff = batch[j] - batch[i]
                value = float(np.sum(diff * diff))
                dist[i][j] = math.inf if math.isnan(value) else value
    scores = []
    for i in range(m):
        neighbours = sorted((dist[i][j], j) for j in range(m) if j != i)
        chosen = [value for value, _ in neighbours[: m - q - 2]]
        try:
            scores.append((math.fsum(chosen), i))
        except OverflowError:
            scores.append((math.inf, i))
    _, best = min(scores)
    return AggregationOutput(batch[best].copy(), chosen_index=best)


def finite_difference_grad(loss, x, step: float = 1e-6, coords=None) -> np.ndarray:
    """Central-difference gradient of ``loss`` at ``x``.

    With ``coords`` given, only those coordinates are estimated and the
    result has ``len(coords)`` entries.
    """
    if step <= 0:
        raise InvalidInputError(f"step must be positive, got {step}")
    x = np.asarray(x, dtype=np.float64)
    idx = range(x.size) if coords is None else coords
    out = []
    for j in idx:
        e = np.zeros_like(x)
        e[j] = step
        out.append((loss(x + e) - loss(x - e)) / (2 * step))
    return np.array(out)


@dataclass(frozen=True)
class OracleReport:
    fast: np.ndarray
    oracle: np.ndarray
    max_abs_deviation: float
    passed: bool


def compare(fast, oracle, tolerance: float = 0.0) -> OracleReport:
    """Compare two results cell by cell; NaNs must coincide, infinities must match."""
    fast = np.asarray(fast, dtype=np.float64)
    oracle = np.asarray(oracle, dtype=np.float64)
    same = (fast == oracle) | (np.isnan(fast) & np.isnan(oracle))
    with np.errstate(invalid="ignore"):
        gap = np.where(same, 0.0, np.abs(fast - oracle))
    gap = np.where(np.isnan(gap), np.inf, gap)
    deviation = float(gap.max()) if gap.size else 0.0
    return OracleReport(fast, oracle, deviation, deviation <= tolerance)
