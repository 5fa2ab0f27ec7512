"""Parameter-server SGD simulation."""

from .data import DataSource, GaussianBlobs, MnistIdx, QuadraticNoise
from .loop import (
    ModelSpec,
    RngStreams,
    RoundRecord,
    TrainingConfig,
    build_model,
    evaluate,
    initial_state,
    run_experiment,
    sgd_step,
    worker_gradient,
)
from .models import LogisticModel, LossKind, ModelState, QuadraticModel, TinyMLP

__all__ = [
    "DataSource", "GaussianBlobs", "MnistIdx", "QuadraticNoise",
    "ModelSpec", "RngStreams", "RoundRecord", "TrainingConfig", "build_model", "evaluate",
    "initial_state", "run_experiment", "sgd_step", "worker_gradient",
    "LogisticModel", "LossKind", "ModelState", "QuadraticModel", "TinyMLP",
]
