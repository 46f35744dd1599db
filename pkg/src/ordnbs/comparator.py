"""Trainable pairwise comparator with a weight-tied feature map.

Both inputs go through the same linear map W (k x d).  The head sees
[z_a ; z_x ; z_a . z_x] and emits one logit, squashed by a sigmoid into
P(anchor latent <= query latent).

Mode 1 trains on binary targets with cross-entropy; mode 2 trains on
Bradley-Terry probabilities with squared error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .metrics import UndefinedAUCError, accuracy, auc, youden_threshold

PROB_CLIP = 1e-7
MODES = (1, 2)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainingPair:
    anchor_features: np.ndarray
    query_features: np.ndarray
    target: float
    boundary_index: int
    # ground-truth indicator [s_i <= x]; equals target in mode 1
    label: int = -1

    def __post_init__(self):
        if self.label < 0:
            self.label = int(round(self.target))


@dataclass
class PairBatch:
    """Column-stacked view of a list of TrainingPairs."""

    anchors: np.ndarray
    queries: np.ndarray
    targets: np.ndarray
    boundaries: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_pairs(cls, pairs: Sequence[TrainingPair]) -> "PairBatch":
        if isinstance(pairs, PairBatch):
            return pairs
        if len(pairs) == 0:
            raise ValueError("empty batch")
        return cls(
            np.stack([p.anchor_features for p in pairs]).astype(float),
            np.stack([p.query_features for p in pairs]).astype(float),
            np.array([p.target for p in pairs], dtype=float),
            np.array([p.boundary_index for p in pairs], dtype=int),
            np.array([p.label for p in pairs], dtype=int),
        )

    def __len__(self):
        return self.targets.size

    def take(self, idx) -> "PairBatch":
        return PairBatch(self.anchors[idx], self.queries[idx], self.targets[idx],
                         self.boundaries[idx], self.labels[idx])

    def to_pairs(self) -> list[TrainingPair]:
        return [TrainingPair(a, q, float(t), int(b), int(lab)) for a, q, t, b, lab
                in zip(self.anchors, self.queries, self.targets, self.boundaries, self.labels)]


@dataclass
class Gradient:
    W: np.ndarray
    head: np.ndarray
    bias: float

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.head, [self.bias]])


@dataclass
class PairwiseComparator:
    W: np.ndarray
    head: np.ndarray
    bias: float = 0.0
    mode: int = 1
    threshold: float = 0.5

    def __post_init__(self):
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.head = np.asarray(self.head, dtype=float).ravel()
        self.bias = float(self.bias)
        if self.mode not in MODES:
            raise ValueError(f"mode must be 1 or 2, got {self.mode}")
        if self.head.size != 2 * self.k + 1:
            raise ValueError(f"head must have {2 * self.k + 1} weights, got {self.head.size}")

    @classmethod
    def init(cls, d: int = 8, k: int = 4, mode: int = 1, seed=None) -> "PairwiseComparator":
        """Uniform init in +-1/sqrt(fan_in) per layer."""
        rng = np.random.default_rng(seed)
        lim_w = 1 / math.sqrt(d)
        lim_h = 1 / math.sqrt(2 * k + 1)
        return cls(
            rng.uniform(-lim_w, lim_w, size=(k, d)),
            rng.uniform(-lim_h, lim_h, size=2 * k + 1),
            0.0, mode, 0.5,
        )

    @property
    def k(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "PairwiseComparator":
        return PairwiseComparator(self.W.copy(), self.head.copy(), self.bias, self.mode, self.threshold)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.head, [self.bias]])

    def set_flat(self, theta: np.ndarray) -> None:
        kd = self.k * self.d
        self.W = theta[:kd].reshape(self.k, self.d).copy()
        self.head = theta[kd:-1].copy()
        self.bias = float(theta[-1])

    def _check(self, a, x):
        a = np.asarray(a, dtype=float)
        x = np.asarray(x, dtype=float)
        if a.shape[-1] != self.d or x.shape[-1] != self.d:
            raise ValueError(
                f"feature dimension mismatch: model d={self.d}, got {a.shape[-1]} and {x.shape[-1]}"
            )
        if a.shape != x.shape:
            raise ValueError(f"anchor shape {a.shape} != query shape {x.shape}")
        return a, x

    def _forward(self, a, x):
        za = a @ self.W.T
        zx = x @ self.W.T
        k = self.k
        dot = np.einsum("...j,...j->...", za, zx)
        logit = za @ self.head[:k] + zx @ self.head[k:2 * k] + self.head[2 * k] * dot + self.bias
        return za, zx, logit

    def forward(self, anchor_features, query_features):
        """P(anchor <= query); scalar for 1-d inputs, vector for batches."""
        a, x = self._check(anchor_features, query_features)
        _, _, logit = self._forward(a, x)
        out = expit(logit)
        return float(out) if np.ndim(out) == 0 else out

    def forward_grid(self, anchor_features, query_features) -> np.ndarray:
        """Probabilities for every (query, anchor) combination, shape (n_q, n_a)."""
        a = np.atleast_2d(np.asarray(anchor_features, dtype=float))
        x = np.atleast_2d(np.asarray(query_features, dtype=float))
        if a.shape[1] != self.d or x.shape[1] != self.d:
            raise ValueError(f"feature dimension mismatch: model d={self.d}")
        k = self.k
        za, zx = a @ self.W.T, x @ self.W.T
        logit = ((zx @ self.head[k:2 * k])[:, None] + (za @ self.head[:k])[None, :]
                 + self.head[2 * k] * (zx @ za.T) + self.bias)
        return expit(logit)

    def predict(self, anchor_features, query_features) -> np.ndarray:
        return np.asarray(self.forward(anchor_features, query_features)) >= self.threshold

    def loss(self, batch) -> float:
        return loss(self, batch)


def forward(model: PairwiseComparator, anchor_features, query_features):
    return model.forward(anchor_features, query_features)


def _loss_and_delta(model, b: PairBatch):
    """Mean loss and dLoss/dlogit per sample."""
    n = len(b)
    a, x = model._check(b.anchors, b.queries)
    za, zx, logit = model._forward(a, x)
    g = expit(logit)
    t = b.targets
    if model.mode == 1:
        gc = np.clip(g, PROB_CLIP, 1 - PROB_CLIP)
        value = -np.mean(t * np.log(gc) + (1 - t) * np.log(1 - gc))
        # the clipped region has zero slope
        inside = (g > PROB_CLIP) & (g < 1 - PROB_CLIP)
        delta = np.where(inside, (g - t) / n, 0.0)
    else:
        r = g - t
        value = np.mean(r * r)
        delta = 2 * r * g * (1 - g) / n
    return float(value), delta, za, zx, a, x


def loss(model: PairwiseComparator, batch) -> float:
    b = PairBatch.from_pairs(batch)
    return _loss_and_delta(model, b)[0]


def loss_and_gradient(model: PairwiseComparator, batch) -> tuple[float, Gradient]:
    b = PairBatch.from_pairs(batch)
    value, delta, za, zx, a, x = _loss_and_delta(model, b)
    k = model.k
    h_a, h_x, h_dot = model.head[:k], model.head[k:2 * k], model.head[2 * k]
    dot = np.einsum("ij,ij->i", za, zx)
    g_head = np.concatenate([za.T @ delta, zx.T @ delta, [dot @ delta]])
    g_bias = float(delta.sum())
    d_za = delta[:, None] * (h_a[None, :] + h_dot * zx)
    d_zx = delta[:, None] * (h_x[None, :] + h_dot * za)
    g_W = d_za.T @ a + d_zx.T @ x
    return value, Gradient(g_W, g_head, g_bias)


def gradient(model: PairwiseComparator, batch) -> Gradient:
    return loss_and_gradient(model, batch)[1]


@dataclass
class OptimizerParams:
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0


@dataclass
class TrainingLog:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for e, (tl, vl) in enumerate(zip(self.train_loss, self.val_loss)):
            w.writerow([e, f"{tl:.12g}", f"{vl:.12g}"])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())


def train(model: PairwiseComparator, pairs, validation_pairs,
          params: OptimizerParams | None = None) -> tuple[PairwiseComparator, TrainingLog]:
    """Minibatch SGD with momentum and early stopping on validation loss.

    Epoch 0 in the log is the untrained model.  Returns a copy holding the
    parameters with the lowest validation loss seen.
    """
    params = params or OptimizerParams()
    train_b = PairBatch.from_pairs(pairs)
    val_b = PairBatch.from_pairs(validation_pairs)
    rng = np.random.default_rng(params.seed)
    model = model.copy()
    theta = model.flat()
    velocity = np.zeros_like(theta)
    log = TrainingLog()

    def record(epoch):
        tl, vl = loss(model, train_b), loss(model, val_b)
        if not (math.isfinite(tl) and math.isfinite(vl)):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        log.train_loss.append(tl)
        log.val_loss.append(vl)
        return vl

    best_val = record(0)
    best = model.copy()
    since_best = 0
    n = len(train_b)
    for epoch in range(1, params.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            _, g = loss_and_gradient(model, train_b.take(order[start:start + params.batch_size]))
            velocity = params.momentum * velocity - params.learning_rate * g.flat()
            theta = theta + velocity
            if not np.all(np.isfinite(theta)):
                raise TrainingError(f"parameters diverged at epoch {epoch}")
            model.set_flat(theta)
        vl = record(epoch)
        if vl < best_val:
            best_val, best, since_best = vl, model.copy(), 0
            log.best_epoch = epoch
        else:
            since_best += 1
            if since_best >= params.patience:
                break
    return best, log


@dataclass
class BoundaryReport:
    boundary_index: int
    n_pairs: int
    accuracy: float
    auc: float | None
    threshold: float


def select_threshold(model: PairwiseComparator, validation_pairs) -> float:
    """Youden threshold for mode 1, 0.5 for mode 2."""
    if model.mode == 2:
        return 0.5
    b = PairBatch.from_pairs(validation_pairs)
    return youden_threshold(model.forward(b.anchors, b.queries), b.labels)


def evaluate_comparator(model: PairwiseComparator, validation_pairs,
                        threshold: float | None = None) -> list[BoundaryReport]:
    """Per-boundary accuracy and AUC against the binary truth [s_i <= x].

    AUC is None for a boundary whose validation pairs hold a single class.
    """
    b = PairBatch.from_pairs(validation_pairs)
    if threshold is None:
        threshold = model.threshold
    scores = np.asarray(model.forward(b.anchors, b.queries))
    out = []
    for i in np.unique(b.boundaries):
        sel = b.boundaries == i
        s, y = scores[sel], b.labels[sel]
        try:
            a = auc(s, y)
        except UndefinedAUCError:
            a = None
        out.append(BoundaryReport(int(i), int(sel.sum()),
                                  accuracy((s >= threshold).astype(int), y), a, float(threshold)))
    return out


# flat text model format, one field per line in this order:
#   ordnbs-comparator 1
#   mode <1|2>
#   d <int>
#   k <int>
#   threshold <float>
#   bias <float>
#   head <2k+1 floats>
#   W <k*d floats, row-major>
MODEL_MAGIC = "ordnbs-comparator 1"


def dumps_model(model: PairwiseComparator) -> str:
    def fl(vals):
        return " ".join(repr(float(v)) for v in vals)

    lines = [
        MODEL_MAGIC,
        f"mode {model.mode}",
        f"d {model.d}",
        f"k {model.k}",
        f"threshold {float(model.threshold)!r}",
        f"bias {float(model.bias)!r}",
        f"head {fl(model.head)}",
        f"W {fl(model.W.ravel())}",
    ]
    return "\n".join(lines) + "\n"


def save_model(model: PairwiseComparator, path) -> None:
    Path(path).write_text(dumps_model(model))


def load_model(path) -> PairwiseComparator:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != MODEL_MAGIC:
        raise ValueError(f"{path}: not a comparator model file")
    fields = {}
    for line in lines[1:]:
        if line.strip():
            key, _, rest = line.partition(" ")
            fields[key] = rest.split()
    d, k = int(fields["d"][0]), int(fields["k"][0])
    W = np.array([float(v) for v in fields["W"]]).reshape(k, d)
    return PairwiseComparator(
        W, np.array([float(v) for v in fields["head"]]), float(fields["bias"][0]),
        int(fields["mode"][0]), float(fields["threshold"][0]),
    )
