"""Aggregation rules over an ``m x d`` batch of worker gradients.

A batch is a float64 array with one row per worker.  Every rule is a pure
function of the batch.  Sums run over rows in ascending worker index, so two
rules that keep the same cells produce bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConstraintError, InvalidInputError
from .selection import rank_window_mask


def as_batch(rows) -> np.ndarray:
    """Validate ``rows`` as a non-empty ``m x d`` float64 matrix."""
    try:
        batch = np.asarray(rows, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"rows do not form a numeric matrix: {exc}") from exc
    if batch.ndim != 2:
        raise InvalidInputError(f"expected an m x d matrix, got shape {batch.shape}")
    if batch.shape[0] < 1 or batch.shape[1] < 1:
        raise InvalidInputError(f"empty batch of shape {batch.shape}")
    return batch


def ordered_sum(batch: np.ndarray, keep: np.ndarray | None = None) -> np.ndarray:
    """Column sums accumulated row by row in worker order, skipping ``~keep``."""
    acc = np.zeros(batch.shape[1])
    with np.errstate(invalid="ignore", over="ignore"):
        for i in range(batch.shape[0]):
            acc += batch[i] if keep is None else np.where(keep[i], batch[i], 0.0)
    return acc


def max_trim(m: int) -> int:
    """Largest admissible trim count for ``m`` values."""
    return math.ceil(m / 2) - 1


def _check_trim(m: int, b: int) -> None:
    if not 0 <= b <= max_trim(m):
        raise ConstraintError(f"trim count b={b} outside 0..ceil(m/2)-1={max_trim(m)} for m={m}")


def _check_krum(m: int, q: int) -> None:
    if q < 0 or 2 * q + 2 >= m:
        raise ConstraintError(f"krum needs 2q+2 < m, got q={q}, m={m}")


def mean(batch) -> np.ndarray:
    batch = as_batch(batch)
    return ordered_sum(batch) / batch.shape[0]


def trimmed_mean_mask(batch, b: int) -> np.ndarray:
    """Cells averaged by the ``b``-trimmed mean: stable ranks ``b .. m-b-1``."""
    batch = as_batch(batch)
    m = batch.shape[0]
    _check_trim(m, b)
    return rank_window_mask(batch, b, m - b)


def trimmed_mean(batch, b: int) -> np.ndarray:
    """Coordinate-wise ``b``-trimmed mean.

    Drops the ``b`` smallest and ``b`` largest values of each coordinate and
    averages the remaining ``m - 2b``.  Duplicates at the thresholds are
    resolved by multiplicity, so exactly ``m - 2b`` values are summed.
    """
    batch = as_batch(batch)
    keep = trimmed_mean_mask(batch, b)
    return ordered_sum(batch, keep) / (batch.shape[0] - 2 * b)


def phocas_mask(batch, b: int) -> np.ndarray:
    """Cells averaged by Phocas: the ``m-b`` nearest to the trimmed mean."""
    batch = as_batch(batch)
    m = batch.shape[0]
    centre = trimmed_mean(batch, b)
    with np.errstate(invalid="ignore", over="ignore"):
        distance = np.abs(batch - centre)
    # distance ties at the boundary go to the lower worker index
    return rank_window_mask(distance, 0, m - b)


def phocas(batch, b: int) -> np.ndarray:
    """Coordinate-wise average of the ``m - b`` values nearest to the trimmed mean."""
    batch = as_batch(batch)
    keep = phocas_mask(batch, b)
    return ordered_sum(batch, keep) / (batch.shape[0] - b)


def _exact_sum(values) -> float:
    try:
        return math.fsum(values)
    except OverflowError:
        return math.inf


def pairwise_sq_distances(batch: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance matrix; NaN distances become ``+inf``."""
    m = batch.shape[0]
    dist = np.empty((m, m))
    with np.errstate(invalid="ignore", over="ignore"):
        for i in range(m):
            diff = batch - batch[i]
            dist[i] = np.sum(diff * diff, axis=1)
    dist[np.isnan(dist)] = np.inf
    return dist


def krum_scores(batch, n_neighbours: int) -> np.ndarray:
    """Sum of squared distances from each row to its ``n_neighbours`` nearest others.

    Scores are summed with exact rounding (``math.fsum``), so they do not
    depend on the order in which neighbours are visited.
    """
    batch = as_batch(batch)
    m = batch.shape[0]
    if not 0 <= n_neighbours <= m - 1:
        raise ConstraintError(f"cannot take {n_neighbours} neighbours among {m} rows")
    dist = pairwise_sq_distances(batch)
    others = dist[~np.eye(m, dtype=bool)].reshape(m, m - 1)
    nearest = np.sort(others, axis=1)[:, :n_neighbours]
    return np.array([_exact_sum(row) for row in nearest])


@dataclass(frozen=True)
class AggregationOutput:
    vector: np.ndarray
    chosen_index: int | None = None
    kept: np.ndarray | None = None  # m x d mask of averaged cells

    @property
    def excluded_counts(self) -> np.ndarray | None:
        if self.kept is None:
            return None
        return self.kept.shape[0] - self.kept.sum(axis=0)


def krum(batch, q: int) -> AggregationOutput:
    """Select the row with the smallest sum of distances to its ``m-q-2`` nearest rows.

    Score ties go to the lowest worker index.
    """
    batch = as_batch(batch)
    m = batch.shape[0]
    _check_krum(m, q)
    scores = krum_scores(batch, m - q - 2)
    index = int(np.argmin(scores))
    return AggregationOutput(batch[index].copy(), chosen_index=index)


def multi_krum_indices(batch, q: int, c: int | None = None, strict: bool = True) -> list[int]:
    """Worker indices picked by ``c`` successive Krum rounds, in pick order.

    Each round rescores the rows not yet picked, keeping the original ``q``.
    A round over ``r`` remaining rows uses ``r - q - 2`` neighbours; when that
    falls below one, ``strict`` mode raises, otherwise the round scores
    against all other remaining rows.  ``c`` defaults to the largest count
    that is feasible in the chosen mode (``m-q-2`` strict, ``m-q`` relaxed).
    """
    batch = as_batch(batch)
    m = batch.shape[0]
    _check_krum(m, q)
    if c is None:
        c = m - q - 2 if strict else m - q
    if not 1 <= c <= m:
        raise ConstraintError(f"multi-krum selection count c={c} outside 1..{m}")
    remaining = list(range(m))
    picked = []
    for round_no in range(1, c + 1):
        n_neighbours = len(remaining) - q - 2
        if n_neighbours < 1:
            if strict:
                raise ConstraintError(
                    f"multi-krum round {round_no}: {len(remaining)} rows left, "
                    f"need remaining-q-2 >= 1 with q={q} (use c <= {m - q - 2})"
                )
            n_neighbours = len(remaining) - 1
        scores = krum_scores(batch[remaining], n_neighbours)
        picked.append(remaining.pop(int(np.argmin(scores))))
    return picked


def multi_krum(batch, q: int, c: int | None = None, strict: bool = True) -> np.ndarray:
    """Average of the rows picked by repeated Krum (see :func:`multi_krum_indices`)."""
    batch = as_batch(batch)
    picked = sorted(multi_krum_indices(batch, q, c, strict))
    return ordered_sum(batch[picked]) / len(picked)


class RuleKind(str, Enum):
    MEAN = "mean"
    KRUM = "krum"
    MULTI_KRUM = "multikrum"
    TRMEAN = "trmean"
    PHOCAS = "phocas"


@dataclass(frozen=True)
class AggregationRule:
    """A rule plus its parameters; call it on a batch to aggregate."""

    kind: RuleKind = RuleKind.MEAN
    q: int = 0
    b: int = 0
    c: int | None = None
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if self.q < 0 or self.b < 0:
            raise ConstraintError(f"negative rule parameter: q={self.q}, b={self.b}")

    def validate(self, m: int) -> None:
        """Raise :class:`ConstraintError` if the rule cannot run on ``m`` rows."""
        if self.kind in (RuleKind.TRMEAN, RuleKind.PHOCAS):
            _check_trim(m, self.b)
        elif self.kind in (RuleKind.KRUM, RuleKind.MULTI_KRUM):
            _check_krum(m, self.q)
            if self.kind is RuleKind.MULTI_KRUM and self.c is not None:
                limit = m - self.q - 2 if self.strict else m
                if not 1 <= self.c <= limit:
                    raise ConstraintError(f"multi-krum c={self.c} outside 1..{limit} for m={m}, q={self.q}")

    def aggregate(self, batch) -> AggregationOutput:
        batch = as_batch(batch)
        if self.kind is RuleKind.MEAN:
            return AggregationOutput(mean(batch))
        if self.kind is RuleKind.KRUM:
            return krum(batch, self.q)
        if self.kind is RuleKind.MULTI_KRUM:
            return AggregationOutput(multi_krum(batch, self.q, self.c, self.strict))
        if self.kind is RuleKind.TRMEAN:
            keep = trimmed_mean_mask(batch, self.b)
            return AggregationOutput(ordered_sum(batch, keep) / (batch.shape[0] - 2 * self.b), kept=keep)
        keep = phocas_mask(batch, self.b)
        return AggregationOutput(ordered_sum(batch, keep) / (batch.shape[0] - self.b), kept=keep)

    def __call__(self, batch) -> np.ndarray:
        return self.aggregate(batch).vector

    def __str__(self) -> str:
        if self.kind is RuleKind.MEAN:
            return "mean"
        if self.kind is RuleKind.KRUM:
            return f"krum(q={self.q})"
        if self.kind is RuleKind.MULTI_KRUM:
            return f"multikrum(q={self.q},c={self.c})"
        return f"{self.kind.value}(b={self.b})"
