import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from byzsgd.attacks import (
    AttackSpec,
    apply_attack,
    apply_bitflip,
    apply_extreme_value,
    apply_gambler,
    apply_gaussian,
    apply_omniscient,
    bit_mask,
    dimensional_diagonal,
    flip_bits,
    shard_bounds,
)
from byzsgd.errors import ConstraintError


def rng(seed=0):
    return np.random.default_rng(seed)


def reference_flip(value, positions):
    """Bit flip through struct, independent of numpy views."""
    (word,) = struct.unpack("<I", struct.pack("<f", value))
    for p in positions:
        word ^= 1 << (p - 1)
    return struct.unpack("<f", struct.pack("<I", word))[0]


def test_gaussian_no_byzantine_is_noop():
    batch = rng().normal(size=(5, 3))
    out, mask = apply_attack(batch, AttackSpec("gaussian", q=0), rng())
    assert np.array_equal(out, batch) and not mask.any()


def test_gaussian_replaces_six_rows_with_wide_noise():
    batch = np.zeros((20, 500))
    out, mask = apply_gaussian(batch, AttackSpec("gaussian", q=6, sigma=200), rng(1))
    assert mask.sum(axis=1).tolist() == [500] * 6 + [0] * 14
    cells = out[mask]
    se = 200 / np.sqrt(cells.size)
    assert abs(cells.mean()) < 3 * se
    assert abs(cells.var() - 200**2) < 3 * 200**2 * np.sqrt(2 / cells.size)


def test_gaussian_deterministic():
    batch = rng().normal(size=(8, 4))
    spec = AttackSpec("gaussian", q=2, placement="dimensional")
    first, _ = apply_attack(batch, spec, rng(5))
    second, _ = apply_attack(batch, spec, rng(5))
    assert np.array_equal(first, second)


def test_omniscient_hand_example():
    batch = np.array([[1.0], [2.0], [3.0]])
    out, mask = apply_omniscient(batch, AttackSpec("omniscient", q=1, rows=(2,), scale=1.0))
    assert out[:, 0].tolist() == [1, 2, -3]
    assert mask[:, 0].tolist() == [False, False, True]
    assert np.array_equal(apply_omniscient(batch, AttackSpec("omniscient", q=0))[0], batch)


def test_omniscient_default_scale():
    out, _ = apply_omniscient(np.ones((4, 2)), AttackSpec("omniscient", q=1))
    assert out[0].tolist() == [-3e20, -3e20]


def test_bit_mask_and_flip_oracle():
    assert bit_mask((22, 30, 31, 32)) == 0xE0200000
    flipped = flip_bits([1.0], (22, 30, 31, 32))[0]
    assert struct.pack(">f", flipped) == bytes.fromhex("DFA00000")
    assert flipped == reference_flip(1.0, (22, 30, 31, 32))
    assert flipped == -2.305843009213694e19
    assert flip_bits([1.5], ())[0] == 1.5
    assert bit_mask((1,), "msb") == 0x80000000


@given(st.floats(allow_nan=False, allow_infinity=False, width=32), st.sets(st.integers(1, 32), max_size=6))
def test_flip_bits_matches_struct(value, positions):
    got = flip_bits([value], tuple(positions))[0]
    want = reference_flip(value, positions)
    assert got == want or (np.isnan(got) and np.isnan(want))


def test_bitflip_one_cell_per_column_in_first_dims():
    batch = rng().normal(size=(20, 1500))
    out, mask = apply_bitflip(batch, AttackSpec("bitflip"), rng(2))
    assert mask.sum() == 1000
    assert mask[:, :1000].sum(axis=0).tolist() == [1] * 1000
    assert not mask[:, 1000:].any()
    assert mask.any(axis=1).sum() > 1  # dimensional: spread across rows
    small, small_mask = apply_bitflip(batch[:, :10], AttackSpec("bitflip"), rng(2))
    assert small_mask.sum() == 10


def test_gambler_examples():
    batch = rng().normal(size=(4, 100))
    out, mask = apply_gambler(batch, AttackSpec("gambler", flip_prob=0.0), rng())
    assert np.array_equal(out, batch) and not mask.any()
    assert shard_bounds(100, 20, 3) == (15, 20)
    assert shard_bounds(103, 20, 19) == (95, 103)
    out, mask = apply_gambler(batch, AttackSpec("gambler", flip_prob=1.0, gambler_factor=-1.0, shard_count=1), rng())
    assert np.array_equal(out, -batch) and mask.all()


def test_gambler_hits_only_target_shard():
    batch = np.ones((20, 100))
    spec = AttackSpec("gambler", flip_prob=0.5, target_shard=2)
    _, mask = apply_gambler(batch, spec, rng(3))
    assert mask[:, 10:15].any()
    assert not mask[:, :10].any() and not mask[:, 15:].any()


def test_diagonal_examples():
    batch = np.arange(1.0, 10.0).reshape(3, 3)
    out, mask = dimensional_diagonal(batch, 0.0)
    assert np.all(out[mask] == 0) and mask.sum() == 3
    out, mask = dimensional_diagonal(batch, 1e6)
    assert np.array_equal(out[mask], -1e6 * batch[mask])
    assert np.array_equal(mask, np.eye(3, dtype=bool))


def test_extreme_value_places_q_cells_per_column():
    out, mask = apply_extreme_value(np.zeros((10, 7)), 3, 5.0, rng())
    assert mask.sum(axis=0).tolist() == [3] * 7
    assert np.all(out[mask] == 5.0)


def test_spec_validation():
    with pytest.raises(ConstraintError):
        AttackSpec("gambler", flip_prob=1.5)
    with pytest.raises(ConstraintError):
        AttackSpec("bitflip", bit_positions=(0,))
    with pytest.raises(ConstraintError):
        apply_attack(np.zeros((3, 2)), AttackSpec("gaussian", q=3), rng())
    with pytest.raises(ConstraintError):
        AttackSpec("gaussian", q=2, rows=(1,))


SPECS = [
    AttackSpec("gaussian", q=3),
    AttackSpec("gaussian", q=3, placement="dimensional"),
    AttackSpec("gaussian", q=2, random_rows=True),
    AttackSpec("omniscient", q=2),
    AttackSpec("omniscient", q=3, placement="dimensional"),
    AttackSpec("bitflip", affected_dims=4),
    AttackSpec("bitflip", q=2, placement="classic"),
    AttackSpec("gambler", flip_prob=0.3, shard_count=3, target_shard=1),
]


@settings(max_examples=60)
@given(st.sampled_from(SPECS), st.integers(7, 12), st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_mask_laws(spec, m, d, seed):
    batch = np.random.default_rng(seed).normal(size=(m, d))
    out, mask = apply_attack(batch, spec, rng(seed))
    # non-interference: unmarked cells are bit-identical
    assert np.array_equal(out.view(np.uint64)[~mask], batch.view(np.uint64)[~mask])
    # mask consistency: every changed cell is marked
    changed = out.view(np.uint64) != batch.view(np.uint64)
    assert not np.any(changed & ~mask)
    q = spec.byzantine_count
    if spec.kind.value == "gambler":
        return
    if spec.resolved_placement.value == "classic":
        rows = mask.any(axis=1)
        assert rows.sum() == q and np.all(mask[rows])
    else:
        assert np.all(mask.sum(axis=0) <= q)
    again, again_mask = apply_attack(batch, spec, rng(seed))
    assert np.array_equal(again, out) and np.array_equal(again_mask, mask)
