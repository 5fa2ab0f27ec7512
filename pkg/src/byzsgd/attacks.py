"""Seeded Byzantine corruption of a gradient batch.

Every attack returns ``(corrupted, mask)``: a new batch and an ``m x d``
boolean matrix marking the cells the attack was allowed to overwrite.
Unmarked cells are bit-identical to the input.

Placement follows the two failure models: ``classic`` corrupts whole worker
rows, ``dimensional`` corrupts up to ``q`` cells in each column.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .aggregation import as_batch
from .errors import ConstraintError


class AttackKind(str, Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"
    OMNISCIENT = "omniscient"
    BITFLIP = "bitflip"
    GAMBLER = "gambler"


class Placement(str, Enum):
    CLASSIC = "classic"
    DIMENSIONAL = "dimensional"


_DEFAULT_Q = {
    AttackKind.NONE: 0,
    AttackKind.GAUSSIAN: 6,
    AttackKind.OMNISCIENT: 6,
    AttackKind.BITFLIP: 1,
    AttackKind.GAMBLER: 0,
}

_DEFAULT_PLACEMENT = {
    AttackKind.NONE: Placement.CLASSIC,
    AttackKind.GAUSSIAN: Placement.CLASSIC,
    AttackKind.OMNISCIENT: Placement.CLASSIC,
    AttackKind.BITFLIP: Placement.DIMENSIONAL,
    AttackKind.GAMBLER: Placement.DIMENSIONAL,
}


@dataclass(frozen=True)
class AttackSpec:
    """Attack parameters.

    ``q`` and ``placement`` default per kind (6 classic rows for Gaussian and
    omniscient, one cell per column for bit-flip).  ``rows`` pins the
    Byzantine workers explicitly; otherwise classic placement takes the first
    ``q`` workers, or a seeded-random subset when ``random_rows`` is set.
    Dimensional placement draws rows per column at random unless ``rows``
    is given.  ``bit_order`` selects how ``bit_positions`` are numbered:
    ``"lsb"`` counts from the least-significant bit (1 = LSB), ``"msb"``
    from the sign bit (1 = sign).
    """

    kind: AttackKind = AttackKind.NONE
    placement: Placement | None = None
    q: int | None = None
    sigma: float = 200.0
    scale: float = 1e20
    bit_positions: tuple[int, ...] = (22, 30, 31, 32)
    bit_order: str = "lsb"
    affected_dims: int = 1000
    flip_prob: float = 0.0005
    gambler_factor: float = -1e20
    shard_count: int = 20
    target_shard: int = 0
    rows: tuple[int, ...] | None = None
    random_rows: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if self.placement is not None:
            object.__setattr__(self, "placement", Placement(self.placement))
        object.__setattr__(self, "bit_positions", tuple(int(p) for p in self.bit_positions))
        if self.rows is not None:
            object.__setattr__(self, "rows", tuple(int(r) for r in self.rows))
            if self.q is not None and self.q != len(self.rows):
                raise ConstraintError(f"q={self.q} disagrees with {len(self.rows)} explicit rows")
            if len(set(self.rows)) != len(self.rows):
                raise ConstraintError(f"duplicate Byzantine rows {self.rows}")
        if self.q is not None and self.q < 0:
            raise ConstraintError(f"negative Byzantine count q={self.q}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ConstraintError(f"flip probability {self.flip_prob} outside [0, 1]")
        if any(not 1 <= p <= 32 for p in self.bit_positions):
            raise ConstraintError(f"bit positions {self.bit_positions} outside 1..32")
        if self.bit_order not in ("lsb", "msb"):
            raise ConstraintError(f"bit_order must be 'lsb' or 'msb', got {self.bit_order!r}")
        if self.sigma < 0:
            raise ConstraintError(f"negative sigma {self.sigma}")
        if self.affected_dims < 0:
            raise ConstraintError(f"negative affected_dims {self.affected_dims}")
        if self.shard_count < 1:
            raise ConstraintError(f"shard_count must be >= 1, got {self.shard_count}")
        if not 0 <= self.target_shard < self.shard_count:
            raise ConstraintError(f"target shard {self.target_shard} outside 0..{self.shard_count - 1}")

    @property
    def byzantine_count(self) -> int:
        if self.rows is not None:
            return len(self.rows)
        return _DEFAULT_Q[self.kind] if self.q is None else self.q

    @property
    def resolved_placement(self) -> Placement:
        return _DEFAULT_PLACEMENT[self.kind] if self.placement is None else self.placement


def _byzantine_rows(m: int, spec: AttackSpec, rng: np.random.Generator) -> np.ndarray:
    q = spec.byzantine_count
    if q >= m:
        raise ConstraintError(f"q={q} Byzantine rows need q < m={m}")
    if spec.rows is not None:
        if any(not 0 <= r < m for r in spec.rows):
            raise ConstraintError(f"Byzantine rows {spec.rows} outside 0..{m - 1}")
        return np.array(sorted(spec.rows), dtype=int)
    if spec.random_rows:
        return np.sort(rng.choice(m, size=q, replace=False))
    return np.arange(q)


def placement_mask(shape, spec: AttackSpec, rng: np.random.Generator, columns=None) -> np.ndarray:
    """Cells an attack may overwrite.

    Classic: ``q`` complete rows.  Dimensional: ``q`` cells per column in
    ``columns`` (all columns by default), rows drawn independently per column.
    """
    m, d = shape
    mask = np.zeros((m, d), dtype=bool)
    cols = np.arange(d) if columns is None else np.asarray(columns, dtype=int)
    q = spec.byzantine_count
    if q >= m:
        raise ConstraintError(f"q={q} Byzantine values per column need q < m={m}")
    if q == 0 or cols.size == 0:
        return mask
    if spec.resolved_placement is Placement.CLASSIC or spec.rows is not None:
        rows = _byzantine_rows(m, spec, rng)
        mask[np.ix_(rows, cols)] = True
        return mask
    picks = np.argsort(rng.random((m, cols.size)), axis=0, kind="stable")[:q]
    mask[picks, np.broadcast_to(cols, picks.shape)] = True
    return mask


def apply_gaussian(batch, spec: AttackSpec, rng: np.random.Generator):
    """Replace Byzantine cells with draws from ``Normal(0, sigma^2)``."""
    batch = as_batch(batch)
    mask = placement_mask(batch.shape, spec, rng)
    out = batch.copy()
    out[mask] = rng.normal(0.0, spec.sigma, size=int(mask.sum()))
    return out, mask


def apply_omniscient(batch, spec: AttackSpec, rng: np.random.Generator | None = None):
    """Replace Byzantine cells with ``-scale`` times the sum of the correct values.

    Under classic placement the sum runs over the correct rows; under
    dimensional placement over the unmarked cells of each column.
    """
    batch = as_batch(batch)
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    mask = placement_mask(batch.shape, spec, rng)
    correct_sum = np.where(mask, 0.0, batch).sum(axis=0)
    out = batch.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        forged = -spec.scale * correct_sum
    out[mask] = np.broadcast_to(forged, batch.shape)[mask]
    return out, mask


def bit_mask(positions, bit_order: str = "lsb") -> int:
    """XOR mask for 1-based bit positions of a 32-bit word."""
    mask = 0
    for p in positions:
        mask |= 1 << (p - 1 if bit_order == "lsb" else 32 - p)
    return mask


def flip_bits(values, positions, bit_order: str = "lsb") -> np.ndarray:
    """Flip bits of the float32 image of ``values``; the result is widened back to float64.

    >>> float(flip_bits([1.0], (22, 30, 31, 32))[0])
    -2.305843009213694e+19
    """
    with np.errstate(over="ignore"):
        single = np.asarray(values, dtype=np.float64).astype(np.float32)
    flipped = single.view(np.uint32) ^ np.uint32(bit_mask(positions, bit_order))
    return flipped.view(np.float32).astype(np.float64)


def apply_bitflip(batch, spec: AttackSpec, rng: np.random.Generator | None = None):
    """Flip ``bit_positions`` of ``q`` cells in each of the first ``affected_dims`` columns."""
    batch = as_batch(batch)
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    d = batch.shape[1]
    mask = placement_mask(batch.shape, spec, rng, columns=np.arange(min(spec.affected_dims, d)))
    out = batch.copy()
    out[mask] = flip_bits(batch[mask], spec.bit_positions, spec.bit_order)
    return out, mask


def shard_bounds(d: int, shard_count: int, shard: int) -> tuple[int, int]:
    """Column range ``[start, stop)`` of a shard; the last shard takes the remainder."""
    if not 0 <= shard < shard_count:
        raise ConstraintError(f"shard {shard} outside 0..{shard_count - 1}")
    size = d // shard_count
    start = shard * size
    stop = d if shard == shard_count - 1 else start + size
    return start, stop


def apply_gambler(batch, spec: AttackSpec, rng: np.random.Generator):
    """Multiply each cell of the target shard by ``gambler_factor`` with probability ``flip_prob``."""
    batch = as_batch(batch)
    m, d = batch.shape
    start, stop = shard_bounds(d, spec.shard_count, spec.target_shard)
    mask = np.zeros((m, d), dtype=bool)
    mask[:, start:stop] = rng.random((m, stop - start)) < spec.flip_prob
    out = batch.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        out[mask] = batch[mask] * spec.gambler_factor
    return out, mask


def apply_attack(batch, spec: AttackSpec, rng: np.random.Generator | None = None):
    """Dispatch on ``spec.kind``; ``rng`` defaults to a generator seeded with ``spec.seed``."""
    batch = as_batch(batch)
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    if spec.kind is AttackKind.NONE or (spec.kind is not AttackKind.GAMBLER and spec.byzantine_count == 0):
        return batch.copy(), np.zeros(batch.shape, dtype=bool)
    if spec.kind is AttackKind.GAUSSIAN:
        return apply_gaussian(batch, spec, rng)
    if spec.kind is AttackKind.OMNISCIENT:
        return apply_omniscient(batch, spec, rng)
    if spec.kind is AttackKind.BITFLIP:
        return apply_bitflip(batch, spec, rng)
    return apply_gambler(batch, spec, rng)


def dimensional_diagonal(batch, magnitude: float):
    """Multiply cell ``(i, i mod d)`` by ``-magnitude`` for every worker ``i``.

    With ``d >= m`` this corrupts exactly one value in each of the first ``m``
    columns, yet touches every row: the standard counterexample for rules
    that average everything or return one of the inputs.
    """
    batch = as_batch(batch)
    m, d = batch.shape
    rows = np.arange(m)
    mask = np.zeros((m, d), dtype=bool)
    mask[rows, rows % d] = True
    out = batch.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        out[mask] = -magnitude * batch[mask]
    return out, mask


def apply_extreme_value(batch, q: int, value: float, rng: np.random.Generator):
    """Set ``q`` random cells per column to ``value`` (a bound stress test, not a field attack)."""
    batch = as_batch(batch)
    spec = AttackSpec(kind=AttackKind.GAUSSIAN, placement=Placement.DIMENSIONAL, q=q)
    mask = placement_mask(batch.shape, spec, rng)
    out = batch.copy()
    out[mask] = value
    return out, mask
