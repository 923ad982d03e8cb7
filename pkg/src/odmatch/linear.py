"""Linear softmax sequence classifier and its closed-form derivatives.

The classifier scores class i for a feature vector x as
``exp(gamma * w_i . x) / sum_j exp(gamma * w_j . x)``; the inverse
temperature gamma is a fixed hyperparameter, not a trained quantity, and
there is no bias term (append a constant feature if one is wanted).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .windows import posterior_matrix


@dataclass
class LinearClassifier:
    """Weight matrix (one row per class) plus inverse temperature."""

    weights: np.ndarray  # (C, d)
    gamma: float = 10.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a (C, d) matrix")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def constant_init(
        cls, num_classes: int, dim: int, gamma: float = 10.0, value: float | None = None
    ) -> "LinearClassifier":
        """All weights equal (default 1/dim), so the posterior is uniform."""
        if value is None:
            value = 1.0 / dim
        return cls(np.full((num_classes, dim), value), gamma)

    def posterior(self, x: np.ndarray) -> np.ndarray:
        """Class posterior for a single feature vector."""
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite feature vector")
        return posterior_matrix(self.weights, self.gamma, x[None, :])[0]

    def posterior_all(self, X: np.ndarray) -> np.ndarray:
        """Posteriors for every row of X, shape (len(X), C)."""
        X = np.asarray(X, dtype=np.float64)
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite feature matrix")
        return posterior_matrix(self.weights, self.gamma, X)

    def predict(self, x: np.ndarray) -> int:
        """Argmax class; ties resolve to the smallest id."""
        return int(np.argmax(self.posterior(x)))

    def predict_all(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.posterior_all(X), axis=1)

    def copy(self) -> "LinearClassifier":
        return LinearClassifier(self.weights.copy(), self.gamma)


def posterior_grad(model: LinearClassifier, x: np.ndarray) -> np.ndarray:
    """Jacobian of the posterior w.r.t. the weight matrix.

    Returns a (C, C, d) array whose [i, j] block is
    d posterior_i / d w_j = gamma * p_i * (delta_ij - p_j) * x.
    """
    p = model.posterior(x)
    C = model.num_classes
    coeff = model.gamma * (np.diag(p) - np.outer(p, p))  # (C, C)
    return coeff[:, :, None] * np.asarray(x, dtype=np.float64)[None, None, :]


def error_rate(model, dataset) -> float:
    """Fraction of positions misclassified, over all sequences."""
    if dataset.labels is None:
        raise ValueError("dataset has no labels")
    pred = model.predict_all(dataset.stacked())
    truth = dataset.stacked_labels()
    return float(np.mean(pred != truth))


def save_model(model: LinearClassifier, path) -> None:
    C, d = model.weights.shape
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"linmodel {C} {d} {format(model.gamma, '.17g')}\n")
        for row in model.weights:
            f.write(",".join(format(v, ".17g") for v in row) + "\n")


def load_model(path) -> LinearClassifier:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().split("\n")
    try:
        header = lines[0].split()
        if len(header) != 4 or header[0] != "linmodel":
            raise ValueError("expected 'linmodel <C> <d> <gamma>'")
        C, d, gamma = int(header[1]), int(header[2]), float(header[3])
    except (ValueError, IndexError) as e:
        raise FormatError(f"{path}: line 1: {e}") from None
    try:
        weights = np.array(
            [[float(v) for v in lines[1 + i].split(",")] for i in range(C)]
        ).reshape(C, d)
    except (ValueError, IndexError) as e:
        raise FormatError(f"{path}: weight rows: {e}") from None
    return LinearClassifier(weights, gamma)
