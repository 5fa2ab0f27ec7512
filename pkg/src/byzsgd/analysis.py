"""Closed-form resilience and convergence bounds, and Monte-Carlo checks of them.

``V`` is always the total variance of a correct gradient, ``E||G - g||^2``,
summed over dimensions.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .aggregation import max_trim
from .attacks import AttackSpec, apply_attack, apply_extreme_value, dimensional_diagonal
from .errors import ConstraintError


def _exact(value) -> Fraction:
    return Fraction(value) if not isinstance(value, Fraction) else value


def delta0(m: int, q: int, V: float) -> float:
    """Krum's classic resilience constant (needs ``2q + 2 < m``)."""
    if q < 0 or 2 * q + 2 >= m:
        raise ConstraintError(f"delta0 needs 2q+2 < m, got m={m}, q={q}")
    if V < 0:
        raise ConstraintError(f"variance must be non-negative, got {V}")
    tail = Fraction(4 * q * (m - q - 2) + 4 * q * q * (m - q - 1), m - 2 * q - 2)
    return float((6 * m - 6 * q + tail) * _exact(V))


def _check_trim_bound(m: int, q: int, b: int, V: float) -> None:
    if q < 0 or 2 * q >= m:
        raise ConstraintError(f"needs 2q < m, got m={m}, q={q}")
    if b < q:
        raise ConstraintError(f"needs b >= q, got b={b}, q={q}")
    if b > max_trim(m):
        raise ConstraintError(f"trim count b={b} exceeds ceil(m/2)-1={max_trim(m)}")
    if m - b - q <= 0:
        raise ConstraintError(f"needs m-b-q > 0, got {m - b - q}")
    if V < 0:
        raise ConstraintError(f"variance must be non-negative, got {V}")


def _trim_ratio(m: int, q: int, b: int) -> Fraction:
    return Fraction(2 * (b + 1) * (m - q), (m - b - q) ** 2)


def delta1(m: int, q: int, b: int, V: float) -> float:
    """Dimensional resilience constant of the ``b``-trimmed mean with ``q`` bad values per coordinate."""
    _check_trim_bound(m, q, b, V)
    return float(_trim_ratio(m, q, b) * _exact(V))


def delta2(m: int, q: int, b: int, V: float) -> float:
    """Dimensional resilience constant of Phocas; equals ``4V + 6 * delta1``."""
    _check_trim_bound(m, q, b, V)
    return float((4 + 6 * _trim_ratio(m, q, b)) * _exact(V))


@dataclass(frozen=True)
class StronglyConvexBound:
    rho: float
    radius: float
    value: float | None = None  # rho^T * dist0 + radius, when T and dist0 are given


def strongly_convex_residual(mu: float, L: float, gamma: float, delta: float,
                             T: int | None = None, dist0: float | None = None) -> StronglyConvexBound:
    """Contraction factor and noise floor of ``E||x^T - x*||`` for SGD on a strongly convex loss."""
    if not 0 < mu <= L:
        raise ConstraintError(f"needs 0 < mu <= L, got mu={mu}, L={L}")
    if not 0 < gamma <= 2 / (mu + L):
        raise ConstraintError(f"needs 0 < gamma <= 2/(mu+L)={2 / (mu + L)}, got {gamma}")
    if delta < 0:
        raise ConstraintError(f"delta must be non-negative, got {delta}")
    rho = 1 - gamma * mu * L / (mu + L)
    radius = (mu + L) / (mu * L) * gamma * math.sqrt(delta)
    value = None
    if T is not None and dist0 is not None:
        value = rho**T * dist0 + radius
    return StronglyConvexBound(rho, radius, value)


def smooth_gradient_bound(L: float, gamma: float, T: int, gap0: float, delta: float) -> float:
    """Bound on the T-round average of ``E||grad F(x^t)||^2`` for an ``L``-smooth loss."""
    if L <= 0:
        raise ConstraintError(f"needs L > 0, got {L}")
    if not 0 < gamma <= 1 / L:
        raise ConstraintError(f"needs 0 < gamma <= 1/L={1 / L}, got {gamma}")
    if T < 1:
        raise ConstraintError(f"needs T >= 1, got {T}")
    if gap0 < 0 or delta < 0:
        raise ConstraintError(f"gap0 and delta must be non-negative, got {gap0}, {delta}")
    return 2 / (gamma * T) * gap0 + delta


@dataclass(frozen=True)
class BoundInputs:
    m: int
    q: int
    b: int
    V: float
    mu: float | None = None
    L: float | None = None
    gamma: float | None = None
    T: int | None = None
    dist0: float | None = None
    gap0: float | None = None


@dataclass
class BoundReport:
    """Every bound that applies to the inputs; ``None`` plus a reason otherwise."""

    delta0: float | None = None
    delta1: float | None = None
    delta2: float | None = None
    strongly_convex: dict | None = None
    smooth: dict | None = None
    reasons: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "delta0": self.delta0,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "strongly_convex": self.strongly_convex,
            "smooth": self.smooth,
            "reasons": dict(self.reasons),
        }


def bound_report(inputs: BoundInputs) -> BoundReport:
    report = BoundReport()
    for name, fn, args in (
        ("delta0", delta0, (inputs.m, inputs.q, inputs.V)),
        ("delta1", delta1, (inputs.m, inputs.q, inputs.b, inputs.V)),
        ("delta2", delta2, (inputs.m, inputs.q, inputs.b, inputs.V)),
    ):
        try:
            setattr(report, name, fn(*args))
        except ConstraintError as exc:
            report.reasons[name] = str(exc)
    # convergence bounds use the tightest applicable resilience constant
    deltas = {k: getattr(report, k) for k in ("delta0", "delta1", "delta2") if getattr(report, k) is not None}
    if inputs.gamma is None or not deltas:
        return report
    for rule_delta, value in deltas.items():
        if inputs.mu is not None and inputs.L is not None:
            try:
                res = strongly_convex_residual(inputs.mu, inputs.L, inputs.gamma, value, inputs.T, inputs.dist0)
                report.strongly_convex = report.strongly_convex or {}
                report.strongly_convex[rule_delta] = {"rho": res.rho, "radius": res.radius, "value": res.value}
            except ConstraintError as exc:
                report.reasons["strongly_convex"] = str(exc)
        if inputs.L is not None and inputs.T is not None and inputs.gap0 is not None:
            try:
                report.smooth = report.smooth or {}
                report.smooth[rule_delta] = smooth_gradient_bound(inputs.L, inputs.gamma, inputs.T, inputs.gap0, value)
            except ConstraintError as exc:
                report.smooth = None
                report.reasons["smooth"] = str(exc)
    return report


# -- Monte-Carlo ------------------------------------------------------------

@dataclass(frozen=True)
class GaussianNoise:
    """Correct gradients ``g + sigma * N(0, I)``; total variance ``d * sigma^2``."""

    g: np.ndarray
    sigma: float

    @property
    def V(self) -> float:
        return self.g.size * self.sigma**2

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return self.g + self.sigma * rng.normal(size=(m, self.g.size))


Attack = Callable[[np.ndarray, np.random.Generator, int], np.ndarray]


def no_attack(batch, rng, trial):
    return batch


def spec_attack(spec: AttackSpec) -> Attack:
    def attack(batch, rng, trial):
        return apply_attack(batch, spec, rng)[0]
    return attack


def extreme_value_attack(q: int, magnitude: float) -> Attack:
    """``q`` cells per column set to ``+magnitude`` on even trials, ``-magnitude`` on odd ones."""
    def attack(batch, rng, trial):
        sign = 1.0 if trial % 2 == 0 else -1.0
        return apply_extreme_value(batch, q, sign * magnitude, rng)[0]
    return attack


def diagonal_attack(magnitude: float) -> Attack:
    def attack(batch, rng, trial):
        return dimensional_diagonal(batch, magnitude)[0]
    return attack


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    trials: int

    def within(self, bound: float, k: float = 3.0) -> bool:
        """False only when the estimate exceeds ``bound`` by more than ``k`` standard errors."""
        return self.mean - k * self.stderr <= bound


def empirical_sq_error(rule: Callable, attack: Attack, noise: GaussianNoise, m: int,
                       trials: int, seed: int = 0) -> MonteCarloEstimate:
    """Estimate ``E||rule(corrupted batch) - g||^2`` over seeded trials."""
    if trials < 1:
        raise ConstraintError(f"trials must be >= 1, got {trials}")
    errors = np.empty(trials)
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))
        batch = attack(noise.sample(rng, m), rng, trial)
        with np.errstate(invalid="ignore", over="ignore"):
            diff = rule(batch) - noise.g
            errors[trial] = float(diff @ diff)
    stderr = float(errors.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return MonteCarloEstimate(float(errors.mean()), stderr, trials)
