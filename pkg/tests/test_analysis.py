import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from byzsgd.aggregation import max_trim, mean, phocas, trimmed_mean
from byzsgd.analysis import (
    BoundInputs,
    GaussianNoise,
    MonteCarloEstimate,
    bound_report,
    delta0,
    delta1,
    delta2,
    empirical_sq_error,
    extreme_value_attack,
    no_attack,
    smooth_gradient_bound,
    strongly_convex_residual,
)
from byzsgd.errors import ConstraintError


def test_delta0_examples():
    assert delta0(20, 6, 1) == 444
    # (24 + (4*1*2 + 4*1*3) / 1) * 2
    assert delta0(5, 1, 2) == 88
    for m in (3, 7, 30):
        assert delta0(m, 0, 1.5) == 6 * m * 1.5
    with pytest.raises(ConstraintError):
        delta0(4, 1, 1)


def test_delta1_delta2_examples():
    assert delta1(20, 6, 8, 1) == 7
    assert delta2(20, 6, 8, 1) == 46
    assert delta1(10, 0, 0, 3.0) == pytest.approx(2 * 3.0 / 10, rel=1e-15)
    assert delta2(20, 6, 8, 0) == 0
    with pytest.raises(ConstraintError):
        delta1(20, 6, 5, 1)  # b < q
    with pytest.raises(ConstraintError):
        delta2(20, 10, 10, 1)  # 2q >= m
    with pytest.raises(ConstraintError):
        delta1(20, 0, 10, 1)  # b beyond ceil(m/2)-1


@given(st.integers(3, 60), st.data(), st.fractions(0, 10))
def test_delta2_is_four_v_plus_six_delta1(m, data, V):
    b = data.draw(st.integers(0, max_trim(m)))
    q = data.draw(st.integers(0, min(b, (m - 1) // 2)))
    ratio = Fraction(2 * (b + 1) * (m - q), (m - b - q) ** 2)
    assert delta1(m, q, b, V) == float(ratio * V)
    assert delta2(m, q, b, V) == float((4 + 6 * ratio) * V)


@given(st.integers(5, 60), st.data())
def test_bounds_grow_with_byzantine_count(m, data):
    b = data.draw(st.integers(1, max_trim(m)))
    q = data.draw(st.integers(1, b))
    if 2 * q < m:
        assert delta1(m, q, b, 1) >= delta1(m, q - 1, b, 1)
    if 2 * q + 2 < m:
        assert delta0(m, q, 1) >= delta0(m, q - 1, 1)


def test_strongly_convex_examples():
    noiseless = strongly_convex_residual(1, 1, 1, 0)
    assert noiseless.rho == 0.5 and noiseless.radius == 0
    bound = strongly_convex_residual(1, 1, 0.1, 7)
    assert bound.rho == pytest.approx(0.95)
    assert bound.radius == pytest.approx(2 * 0.1 * math.sqrt(7))
    assert bound.radius == pytest.approx(0.5292, abs=1e-4)
    far = strongly_convex_residual(1, 1, 0.1, 7, T=10_000, dist0=123.0)
    assert far.value == pytest.approx(bound.radius)
    with pytest.raises(ConstraintError):
        strongly_convex_residual(1, 1, 1.5, 0)
    with pytest.raises(ConstraintError):
        strongly_convex_residual(2, 1, 0.1, 0)


def test_smooth_bound_examples():
    assert smooth_gradient_bound(1, 0.1, 100, 0, 7) == 7
    assert smooth_gradient_bound(1, 0.1, 100, 5, 7) == pytest.approx(8)
    with pytest.raises(ConstraintError):
        smooth_gradient_bound(1, 2.0, 100, 5, 7)


def test_bound_report():
    report = bound_report(BoundInputs(m=20, q=6, b=8, V=1)).to_dict()
    assert (report["delta0"], report["delta1"], report["delta2"]) == (444, 7, 46)
    small = bound_report(BoundInputs(m=4, q=1, b=1, V=1))
    assert small.delta0 is None and "2q+2 < m" in small.reasons["delta0"]
    full = bound_report(BoundInputs(m=20, q=6, b=8, V=1, mu=1, L=1, gamma=0.1, T=200, dist0=1, gap0=2))
    assert full.strongly_convex["delta2"]["radius"] == pytest.approx(0.2 * math.sqrt(46))
    assert full.smooth["delta1"] == pytest.approx(2 / 20 * 2 + 7)


def test_monte_carlo_mean_matches_averaging_variance():
    noise = GaussianNoise(np.zeros(8), 1.0)
    est = empirical_sq_error(mean, no_attack, noise, 10, 3000, seed=1)
    assert abs(est.mean - noise.V / 10) <= 3 * est.stderr


@pytest.mark.parametrize("rule, bound", [
    (lambda v: trimmed_mean(v, 8), delta1),
    (lambda v: phocas(v, 8), delta2),
])
def test_monte_carlo_extreme_value_within_bound(rule, bound):
    noise = GaussianNoise(np.zeros(4), 0.5)
    est = empirical_sq_error(rule, extreme_value_attack(6, 1e6 * math.sqrt(noise.V)), noise, 20, 500)
    assert est.within(bound(20, 6, 8, noise.V))


def test_estimate_within_rule():
    assert MonteCarloEstimate(10.0, 1.0, 100).within(7.0)
    assert not MonteCarloEstimate(10.5, 1.0, 100).within(7.0)
    with pytest.raises(ConstraintError):
        empirical_sq_error(mean, no_attack, GaussianNoise(np.zeros(1), 1.0), 3, 0)
