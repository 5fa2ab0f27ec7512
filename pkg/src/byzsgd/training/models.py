"""Loss models with analytic gradients.

Parameters are always a flat float64 vector.  Classification samples are
``(features, labels)`` pairs; quadratic samples are noise vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import InvalidInputError


class LossKind(str, Enum):
    QUADRATIC = "quadratic"
    LOGISTIC = "logistic"
    TINY_MLP = "mlp"


def _check_dim(x: np.ndarray, dim: int) -> None:
    if x.shape != (dim,):
        raise InvalidInputError(f"parameter vector has shape {x.shape}, model expects ({dim},)")


class QuadraticModel:
    """``f(x; z) = 0.5 * ||x - x*||^2 - <z, x - x*>`` with zero-mean noise ``z``.

    The population loss is ``F(x) = 0.5 * ||x - x*||^2`` exactly (``F* = 0``),
    and a sample gradient is ``x - x* - z``.
    """

    kind = LossKind.QUADRATIC
    smoothness = 1.0
    strong_convexity = 1.0
    is_classifier = False

    def __init__(self, dim: int, x_star=None, init_scale: float = 1.0):
        self.dim = dim
        self.x_star = np.zeros(dim) if x_star is None else np.asarray(x_star, dtype=np.float64)
        self.init_scale = init_scale

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return self.x_star + self.init_scale

    def _noise(self, samples) -> np.ndarray:
        z = np.asarray(samples, dtype=np.float64)
        if z.ndim != 2 or z.shape[1] != self.dim or z.shape[0] == 0:
            raise InvalidInputError(f"quadratic samples must be n x {self.dim} with n >= 1, got {z.shape}")
        return z.mean(axis=0)

    def loss(self, x, samples) -> float:
        _check_dim(x, self.dim)
        r = x - self.x_star
        return float(0.5 * r @ r - self._noise(samples) @ r)

    def gradient(self, x, samples) -> np.ndarray:
        _check_dim(x, self.dim)
        return x - self.x_star - self._noise(samples)


def _split_samples(samples):
    try:
        features, labels = samples
    except (TypeError, ValueError) as exc:
        raise InvalidInputError("classification samples must be a (features, labels) pair") from exc
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or labels.shape != (features.shape[0],) or features.shape[0] == 0:
        raise InvalidInputError(f"bad sample shapes {features.shape} / {labels.shape}")
    return features, labels


def _softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradient with respect to the logits."""
    n = logits.shape[0]
    with np.errstate(invalid="ignore", over="ignore"):
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        norm = exp.sum(axis=1, keepdims=True)
        loss = float(np.mean(np.log(norm[:, 0]) - shifted[np.arange(n), labels]))
        probs = exp / norm
    probs[np.arange(n), labels] -= 1.0
    return loss, probs / n


class LogisticModel:
    """Multinomial logistic regression; parameters are ``[W.ravel(), bias]``."""

    kind = LossKind.LOGISTIC
    strong_convexity = 0.0
    is_classifier = True

    def __init__(self, features: int, classes: int):
        self.features = features
        self.classes = classes
        self.dim = classes * features + classes
        self.smoothness: float | None = None

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(self.dim)

    def _unpack(self, x):
        _check_dim(x, self.dim)
        k, p = self.classes, self.features
        return x[: k * p].reshape(k, p), x[k * p :]

    def logits(self, x, features) -> np.ndarray:
        weights, bias = self._unpack(x)
        with np.errstate(invalid="ignore", over="ignore"):
            return features @ weights.T + bias

    def loss(self, x, samples) -> float:
        features, labels = _split_samples(samples)
        return _softmax_cross_entropy(self.logits(x, features), labels)[0]

    def gradient(self, x, samples) -> np.ndarray:
        features, labels = _split_samples(samples)
        _, dlogits = _softmax_cross_entropy(self.logits(x, features), labels)
        with np.errstate(invalid="ignore", over="ignore"):
            return np.concatenate([(dlogits.T @ features).ravel(), dlogits.sum(axis=0)])

    def predict(self, x, features) -> np.ndarray:
        return np.argmax(self.logits(x, features), axis=1)

    def estimate_smoothness(self, features) -> float:
        """Upper bound ``0.5 * lambda_max(E[[x;1][x;1]^T])`` on the Hessian norm.

        The softmax Jacobian ``diag(p) - p p^T`` has spectral norm at most 1/2.
        """
        aug = np.hstack([features, np.ones((features.shape[0], 1))])
        second_moment = aug.T @ aug / aug.shape[0]
        self.smoothness = 0.5 * float(np.linalg.eigvalsh(second_moment)[-1])
        return self.smoothness


class TinyMLP:
    """One hidden ReLU layer; parameters are ``[W1, b1, W2, b2]`` flattened."""

    kind = LossKind.TINY_MLP
    strong_convexity = 0.0
    is_classifier = True

    def __init__(self, features: int, classes: int, hidden: int = 32):
        self.features = features
        self.classes = classes
        self.hidden = hidden
        self._sizes = [hidden * features, hidden, classes * hidden, classes]
        self.dim = sum(self._sizes)
        self.smoothness: float | None = None

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        w1 = rng.normal(0.0, np.sqrt(2.0 / self.features), size=(self.hidden, self.features))
        w2 = rng.normal(0.0, np.sqrt(1.0 / self.hidden), size=(self.classes, self.hidden))
        return np.concatenate([w1.ravel(), np.zeros(self.hidden), w2.ravel(), np.zeros(self.classes)])

    def _unpack(self, x):
        _check_dim(x, self.dim)
        w1, b1, w2, b2 = np.split(x, np.cumsum(self._sizes)[:-1])
        return (w1.reshape(self.hidden, self.features), b1, w2.reshape(self.classes, self.hidden), b2)

    def _forward(self, x, features):
        w1, b1, w2, b2 = self._unpack(x)
        with np.errstate(invalid="ignore", over="ignore"):
            pre = features @ w1.T + b1
            act = np.maximum(pre, 0.0)
            return pre, act, act @ w2.T + b2

    def loss(self, x, samples) -> float:
        features, labels = _split_samples(samples)
        return _softmax_cross_entropy(self._forward(x, features)[2], labels)[0]

    def gradient(self, x, samples) -> np.ndarray:
        features, labels = _split_samples(samples)
        _, _, w2, _ = self._unpack(x)
        pre, act, logits = self._forward(x, features)
        _, dlogits = _softmax_cross_entropy(logits, labels)
        with np.errstate(invalid="ignore", over="ignore"):
            dpre = (dlogits @ w2) * (pre > 0)
            return np.concatenate([
                (dpre.T @ features).ravel(),
                dpre.sum(axis=0),
                (dlogits.T @ act).ravel(),
                dlogits.sum(axis=0),
            ])

    def predict(self, x, features) -> np.ndarray:
        return np.argmax(self._forward(x, features)[2], axis=1)

    def estimate_smoothness(self, samples, rng: np.random.Generator, pairs: int = 32, radius: float = 0.1) -> float:
        """Largest observed gradient secant ratio around random initialisations."""
        best = 0.0
        for _ in range(pairs):
            x = self.init_params(rng)
            step = rng.normal(size=self.dim)
            step *= radius / np.linalg.norm(step)
            change = np.linalg.norm(self.gradient(x + step, samples) - self.gradient(x, samples))
            best = max(best, float(change / radius))
        self.smoothness = best
        return best


@dataclass
class ModelState:
    """Current parameters plus the loss model and its curvature constants."""

    x: np.ndarray
    model: QuadraticModel | LogisticModel | TinyMLP
    smoothness: float | None = None
    strong_convexity: float = 0.0

    def __post_init__(self):
        if self.smoothness is not None and not 0.0 <= self.strong_convexity <= self.smoothness:
            raise InvalidInputError(
                f"need 0 <= mu_F <= L_F, got mu={self.strong_convexity}, L={self.smoothness}"
            )

    @property
    def loss_kind(self) -> LossKind:
        return self.model.kind

    @property
    def x_star(self) -> np.ndarray | None:
        return getattr(self.model, "x_star", None)
