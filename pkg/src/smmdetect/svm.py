"""Linear soft-margin SVM trained by seeded stochastic subgradient
descent (Pegasos-style schedule).

The objective is (1/2)||w||^2 + C * sum_i hinge(y_i (w.x_i + b)),
optimized in its scaled form (lambda/2)||w||^2 + (1/n) sum_i hinge with
lambda = 1/(C n) and step size 1/(lambda t) at step t.  Features are
standardized with training statistics inside the model, so raw samples,
handcrafted features and learned features all get the same treatment;
constant features are passed through centered.  The bias takes plain
subgradient steps and is not regularized.  sign(0) predicts -1 (no-SMM)
by convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass
class SvmModel:
    weights: np.ndarray
    bias: float
    C: float
    feature_mean: np.ndarray
    feature_scale: np.ndarray  # population std; 1.0 for constant features
    objective_history: list[float] = field(default_factory=list)

    def standardize(self, F: np.ndarray) -> np.ndarray:
        F = np.asarray(F, dtype=np.float64)
        if F.ndim != 2 or F.shape[1] != self.weights.shape[0]:
            cols = F.shape[1] if F.ndim == 2 else "?"
            raise ValidationError(
                f"feature matrix has {cols} columns, model expects {self.weights.shape[0]}"
            )
        return (F - self.feature_mean) / self.feature_scale


def _objective(w, b, X, y, C) -> float:
    margins = y * (X @ w + b)
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())


def svm_train(F: np.ndarray, y: np.ndarray, C: float = 1.0, epochs: int = 20, seed: int = 0) -> SvmModel:
    """Train on (n, m) features with labels in {-1, +1}.

    Runs epochs * n single-sample steps, each epoch visiting a seeded
    permutation of the data; deterministic in (data, C, seed).  The full
    objective is recorded at initialization and after every epoch.
    """
    F = np.asarray(F, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] != y.shape[0]:
        raise ValidationError("features must be (n, m) with one label per row")
    n, m = F.shape
    if n < 2:
        raise ValidationError("svm_train needs at least 2 samples")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise ValidationError("svm_train needs both classes present")
    if C <= 0 or epochs < 1:
        raise ValidationError("C must be positive and epochs >= 1")

    mean = F.mean(axis=0)
    std = F.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    X = (F - mean) / scale

    lam = 1.0 / (C * n)
    w = np.zeros(m)
    b = 0.0
    rng = np.random.default_rng(seed)
    history = [_objective(w, b, X, y, C)]
    t = 0
    for _epoch in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            active = y[i] * (X[i] @ w + b) < 1.0
            w *= 1.0 - eta * lam
            if active:
                w += eta * y[i] * X[i]
                b += eta * y[i]
        history.append(_objective(w, b, X, y, C))
    return SvmModel(
        weights=w, bias=float(b), C=C, feature_mean=mean, feature_scale=scale, objective_history=history
    )


def svm_predict(model: SvmModel, F: np.ndarray) -> np.ndarray:
    """sign(w.x + b) with the train-time standardization; sign(0) = -1."""
    X = model.standardize(F)
    scores = X @ model.weights + model.bias
    return np.where(scores > 0, 1, -1).astype(np.int64)
