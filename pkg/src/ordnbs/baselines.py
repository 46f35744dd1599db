"""Direct-prediction references on the same features as the NBS pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import log_softmax, softmax

from .comparator import OptimizerParams, TrainingError
from .core import Item, OrdinalScale, categories_of


class SingularFitError(ValueError):
    pass


def _xy(items: Sequence[Item]):
    if not items:
        raise ValueError("no training items")
    X = np.stack([it.features for it in items]).astype(float)
    y = np.array([it.latent_value for it in items])
    return X, y


@dataclass
class SoftmaxClassifier:
    W: np.ndarray  # (n_categories, d)
    b: np.ndarray
    log: list = field(default_factory=list, repr=False)

    def proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return softmax(X @ self.W.T + self.b, axis=1)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.proba(X), axis=1)


def _xent(W, b, X, y):
    logp = log_softmax(X @ W.T + b, axis=1)
    return -np.mean(logp[np.arange(y.size), y])


def train_classifier(items: Sequence[Item], scale: OrdinalScale,
                     validation: Sequence[Item] | None = None,
                     params: OptimizerParams | None = None) -> SoftmaxClassifier:
    """Linear softmax over categories, SGD with momentum and early stopping.

    Without a validation set the training loss drives early stopping.
    """
    params = params or OptimizerParams()
    X, lat = _xy(items)
    y = categories_of(scale, lat)
    if np.unique(y).size < 2:
        raise ValueError("training data must contain at least two categories")
    Xv, yv = (X, y)
    if validation:
        Xv, lv = _xy(validation)
        yv = categories_of(scale, lv)
    K, d = scale.n_categories, X.shape[1]
    rng = np.random.default_rng(params.seed)
    lim = 1 / math.sqrt(d)
    W = rng.uniform(-lim, lim, size=(K, d))
    b = np.zeros(K)
    vW, vb = np.zeros_like(W), np.zeros_like(b)
    best = (_xent(W, b, Xv, yv), W.copy(), b.copy())
    log = [best[0]]
    since = 0
    onehot = np.eye(K)
    for epoch in range(1, params.max_epochs + 1):
        order = rng.permutation(y.size)
        for s in range(0, y.size, params.batch_size):
            idx = order[s:s + params.batch_size]
            P = softmax(X[idx] @ W.T + b, axis=1)
            G = (P - onehot[y[idx]]) / idx.size
            vW = params.momentum * vW - params.learning_rate * (G.T @ X[idx])
            vb = params.momentum * vb - params.learning_rate * G.sum(axis=0)
            W, b = W + vW, b + vb
        vl = _xent(W, b, Xv, yv)
        if not math.isfinite(vl):
            raise TrainingError(f"classifier diverged at epoch {epoch}")
        log.append(vl)
        if vl < best[0]:
            best, since = (vl, W.copy(), b.copy()), 0
        else:
            since += 1
            if since >= params.patience:
                break
    return SoftmaxClassifier(best[1], best[2], log)


@dataclass
class LinearRegressor:
    coef: np.ndarray
    intercept: float
    scale: OrdinalScale

    def predict_value(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.clip(X @ self.coef + self.intercept, self.scale.low, self.scale.high)

    def predict(self, X) -> np.ndarray:
        return categories_of(self.scale, self.predict_value(X))


def train_regressor(items: Sequence[Item], scale: OrdinalScale) -> LinearRegressor:
    """Least-squares fit of latent value on features, then category mapping."""
    X, y = _xy(items)
    A = np.column_stack([X, np.ones(y.size)])
    sol, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        raise SingularFitError(f"design matrix has rank {rank} < {A.shape[1]}")
    return LinearRegressor(sol[:-1], float(sol[-1]), scale)
