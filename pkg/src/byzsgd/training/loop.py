"""Synchronous parameter-server SGD with Byzantine corruption."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..aggregation import AggregationRule, mean
from ..attacks import AttackSpec, apply_attack
from ..errors import ConstraintError, InvalidInputError, RoundError
from .data import DataSource, GaussianBlobs, QuadraticNoise
from .models import LogisticModel, LossKind, ModelState, QuadraticModel, TinyMLP

_PURPOSES = {"data": 0, "attack": 1, "init": 2, "test": 3, "eval": 4, "smoothness": 5}


class RngStreams:
    """Independent generators keyed by ``(purpose, *indices)`` under one master seed."""

    def __init__(self, seed: int):
        self.seed = seed

    def get(self, purpose: str, *keys: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(_PURPOSES[purpose], *keys))
        return np.random.default_rng(seq)


@dataclass(frozen=True)
class ModelSpec:
    kind: LossKind = LossKind.LOGISTIC
    dim: int = 20  # quadratic only
    hidden: int = 32  # mlp only
    init_scale: float = 1.0  # quadratic only: x0 = x* + init_scale

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))


@dataclass(frozen=True)
class TrainingConfig:
    workers: int = 20
    rounds: int = 500
    gamma: float = 0.1
    rule: AggregationRule = field(default_factory=AggregationRule)
    attack: AttackSpec = field(default_factory=AttackSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    data: DataSource = field(default_factory=lambda: DataSource(GaussianBlobs()))
    eval_every: int = 10
    seed: int = 0
    record_timing: bool = False
    track_gradients: bool = False
    # position p of the batch holds worker worker_permutation[p]
    worker_permutation: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise InvalidInputError(f"learning rate must be positive, got {self.gamma}")
        if self.rounds < 1 or self.workers < 1:
            raise InvalidInputError(f"need rounds >= 1 and workers >= 1, got {self.rounds}, {self.workers}")
        if self.eval_every < 1:
            raise InvalidInputError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.worker_permutation is not None and sorted(self.worker_permutation) != list(range(self.workers)):
            raise InvalidInputError("worker_permutation must be a permutation of 0..workers-1")


@dataclass
class RoundRecord:
    round: int
    train_loss: float
    test_accuracy: float | None = None
    agg_deviation: float | None = None
    dist_to_opt: float | None = None
    agg_time_ns: int | None = None
    # only with track_gradients: ||grad F(x^t)||^2 before the step and the
    # unbiased spread sum ||v_i - mean||^2 / (m-1) of the correct gradients
    grad_norm_sq: float | None = None
    grad_variance: float | None = None


def build_model(spec: ModelSpec, data: DataSource):
    gen = data.generator
    if spec.kind is LossKind.QUADRATIC:
        if not isinstance(gen, QuadraticNoise):
            raise InvalidInputError("the quadratic model needs quadratic noise data")
        if gen.dim != spec.dim:
            raise InvalidInputError(f"model dim {spec.dim} != noise dim {gen.dim}")
        return QuadraticModel(spec.dim, init_scale=spec.init_scale)
    if isinstance(gen, QuadraticNoise):
        raise InvalidInputError(f"{spec.kind.value} model needs labelled data")
    if spec.kind is LossKind.LOGISTIC:
        return LogisticModel(gen.features, gen.classes)
    return TinyMLP(gen.features, gen.classes, spec.hidden)


def worker_gradient(model, x, samples) -> np.ndarray:
    """Gradient of the worker's empirical loss over ``samples``."""
    return model.gradient(x, samples)


def sgd_step(x, aggregated, gamma: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    aggregated = np.asarray(aggregated, dtype=np.float64)
    if x.shape != aggregated.shape:
        raise InvalidInputError(f"update shape {aggregated.shape} does not match parameters {x.shape}")
    with np.errstate(invalid="ignore", over="ignore"):
        return x - gamma * aggregated


def evaluate(state: ModelState, testset) -> float:
    """Top-1 accuracy of the current parameters on ``testset``."""
    features, labels = testset
    labels = np.asarray(labels)
    if labels.size == 0:
        raise InvalidInputError("empty test set")
    return float(np.mean(state.model.predict(state.x, features) == labels))


def initial_state(config: TrainingConfig, streams: RngStreams | None = None) -> ModelState:
    streams = RngStreams(config.seed) if streams is None else streams
    model = build_model(config.model, config.data)
    x = model.init_params(streams.get("init"))
    return ModelState(x, model, getattr(model, "smoothness", None), model.strong_convexity)


def run_experiment(config: TrainingConfig) -> list[RoundRecord]:
    """Run ``config.rounds`` rounds of sample, attack, aggregate, step.

    Every random draw comes from a stream keyed by (purpose, round, worker),
    so the result depends only on the config.  A rule constraint violation
    aborts with :class:`RoundError` naming the 1-based round.
    """
    streams = RngStreams(config.seed)
    state = initial_state(config, streams)
    model, data, m = state.model, config.data, config.workers
    gen = data.generator
    evalset = gen.evaluation_set(streams.get("eval"), data.eval_size)
    testset = gen.testset(streams.get("test"), data.test_size) if model.is_classifier else None
    order = range(m) if config.worker_permutation is None else config.worker_permutation

    records = []
    for t in range(config.rounds):
        x = state.x
        grads = np.stack([
            worker_gradient(model, x, gen.sample(streams.get("data", t, w), data.batch_size))
            for w in order
        ])
        grad_norm_sq = grad_variance = None
        if config.track_gradients:
            full = model.gradient(x, evalset)
            grad_norm_sq = float(full @ full)
            spread = grads - grads.mean(axis=0)
            grad_variance = float(np.sum(spread * spread) / max(m - 1, 1))

        attacked, _ = apply_attack(grads, config.attack, streams.get("attack", t))
        started = time.perf_counter_ns()
        try:
            update = config.rule(attacked)
        except ConstraintError as exc:
            raise RoundError(t + 1, exc) from exc
        elapsed = time.perf_counter_ns() - started

        with np.errstate(invalid="ignore", over="ignore"):
            deviation = float(np.linalg.norm(update - mean(grads)))
        state.x = sgd_step(x, update, config.gamma)

        record = RoundRecord(
            round=t + 1,
            train_loss=model.loss(state.x, evalset),
            agg_deviation=deviation,
            agg_time_ns=elapsed if config.record_timing else None,
            grad_norm_sq=grad_norm_sq,
            grad_variance=grad_variance,
        )
        if testset is not None and ((t + 1) % config.eval_every == 0 or t + 1 == config.rounds):
            record.test_accuracy = evaluate(state, testset)
        if model.kind is LossKind.QUADRATIC:
            record.dist_to_opt = float(np.linalg.norm(state.x - model.x_star))
        records.append(record)
    return records
