"""Sample generators feeding the simulated workers.

Each source draws i.i.d. samples from a generator it is handed, so the
caller controls stream separation (per worker, per round, per purpose).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .idx import load_mnist_split


@dataclass(frozen=True)
class QuadraticNoise:
    """Zero-mean Gaussian gradient noise for the quadratic model.

    Per-sample noise is scaled so that the average over a batch of ``n``
    samples has total variance ``variance`` (``E||G - g||^2 = V``).
    """

    variance: float
    dim: int
    kind: str = field(default="quadratic", init=False)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        std = np.sqrt(self.variance * n / self.dim)
        return rng.normal(0.0, std, size=(n, self.dim))

    def evaluation_set(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # noise has mean zero, so the loss at z = 0 is the population loss
        return np.zeros((1, self.dim))


@dataclass(frozen=True)
class GaussianBlobs:
    """Isotropic Gaussian clusters, one per class, centres fixed by ``seed``."""

    classes: int = 10
    features: int = 20
    spread: float = 1.0
    separation: float = 0.6
    seed: int = 0
    kind: str = field(default="blobs", init=False)

    @cached_property
    def centres(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.normal(0.0, self.separation, size=(self.classes, self.features))

    def sample(self, rng: np.random.Generator, n: int):
        labels = rng.integers(0, self.classes, size=n)
        features = self.centres[labels] + rng.normal(0.0, self.spread, size=(n, self.features))
        return features, labels

    def evaluation_set(self, rng: np.random.Generator, n: int):
        return self.sample(rng, n)

    def testset(self, rng: np.random.Generator, n: int):
        return self.sample(rng, n)


@dataclass(frozen=True)
class MnistIdx:
    """MNIST from a directory of IDX files; workers sample the train split with replacement."""

    path: str
    kind: str = field(default="mnist", init=False)

    @cached_property
    def train(self):
        return load_mnist_split(self.path, "train")

    @cached_property
    def test(self):
        return load_mnist_split(self.path, "test")

    @property
    def features(self) -> int:
        return self.train[0].shape[1]

    @property
    def classes(self) -> int:
        return int(max(self.train[1].max(), self.test[1].max())) + 1

    def sample(self, rng: np.random.Generator, n: int):
        features, labels = self.train
        idx = rng.integers(0, labels.size, size=n)
        return features[idx], labels[idx]

    def evaluation_set(self, rng: np.random.Generator, n: int):
        return self.sample(rng, n)

    def testset(self, rng: np.random.Generator, n: int):
        features, labels = self.test
        if n >= labels.size:
            return features, labels
        idx = np.sort(rng.choice(labels.size, size=n, replace=False))
        return features[idx], labels[idx]


@dataclass(frozen=True)
class DataSource:
    generator: QuadraticNoise | GaussianBlobs | MnistIdx
    batch_size: int = 32
    test_size: int = 2000
    eval_size: int = 2000
