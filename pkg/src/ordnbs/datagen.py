"""Synthetic population, dataset splits, anchor extraction and pair building.

Items carry a scalar latent value (BMI-like) and a feature vector in which
every coordinate is a noisy linear read-out of the latent value.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import truncnorm

from .comparator import PairBatch
from .core import (DEFAULT_GAMMA, AnchorPool, DataInsufficiencyError, Item,
                   OrdinalScale)
from .oracles import bradley_terry_prob


@dataclass(frozen=True)
class PopulationSpec:
    size: int = 16000
    latent_mean: float = 26.5
    latent_sd: float = 4.5
    low: float = 16.0
    high: float = 40.0
    feature_dim: int = 8
    # calibrated by scripts/calibrate_noise.py for per-boundary AUC in 0.70-0.85
    feature_noise_sd: float = 3.0
    seed: int = 0

    def validate(self) -> None:
        if self.size < 1:
            raise ValueError("population size must be >= 1")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if not self.latent_sd > 0:
            raise ValueError("latent_sd must be positive")
        if not self.low < self.high:
            raise ValueError("latent range is empty")
        if self.feature_noise_sd < 0:
            raise ValueError("feature_noise_sd must be non-negative")


def mixing_constants(d: int) -> np.ndarray:
    """Fixed per-coordinate gains, evenly spread over [0.5, 1.5]."""
    return np.linspace(0.5, 1.5, d) if d > 1 else np.ones(1)


def features_for(latent: np.ndarray, spec: PopulationSpec, rng) -> np.ndarray:
    """Coordinate j = c_j * standardized latent + N(0, feature_noise_sd^2)."""
    z = (np.asarray(latent, dtype=float) - spec.latent_mean) / spec.latent_sd
    c = mixing_constants(spec.feature_dim)
    noise = rng.standard_normal((z.size, spec.feature_dim)) * spec.feature_noise_sd
    return z[:, None] * c[None, :] + noise


def generate_population(spec: PopulationSpec) -> list[Item]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    a = (spec.low - spec.latent_mean) / spec.latent_sd
    b = (spec.high - spec.latent_mean) / spec.latent_sd
    latent = truncnorm.rvs(a, b, loc=spec.latent_mean, scale=spec.latent_sd,
                           size=spec.size, random_state=rng)
    latent = np.clip(latent, spec.low, spec.high)
    feats = features_for(latent, spec, rng)
    return [Item(i, float(v), f) for i, (v, f) in enumerate(zip(latent, feats))]


@dataclass(frozen=True)
class DatasetSplit:
    training_I: tuple[Item, ...]
    validation: tuple[Item, ...]
    test: tuple[Item, ...]
    anchors: AnchorPool

    @property
    def training_II(self) -> tuple[Item, ...]:
        used = self.anchors.ids()
        return tuple(it for it in self.training_I if it.id not in used)

    def tags(self) -> dict:
        out = {}
        for it in self.training_I:
            out[it.id] = "train"
        for it_id in self.anchors.ids():
            out[it_id] = "anchor"
        for it in self.validation:
            out[it.id] = "validation"
        for it in self.test:
            out[it.id] = "test"
        return out


def split_and_anchor(items: Sequence[Item], scale: OrdinalScale, gamma: float = DEFAULT_GAMMA,
                     split_fractions=(0.55, 0.25, 0.2), seed: int = 0) -> DatasetSplit:
    """Shuffle into training I / validation / test, then pull anchors from training I."""
    fr = np.asarray(split_fractions, dtype=float)
    if fr.size != 3 or np.any(fr < 0) or not np.isclose(fr.sum(), 1.0):
        raise ValueError(f"split fractions must be three non-negatives summing to 1: {split_fractions}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(items))
    n_train = int(round(fr[0] * len(items)))
    n_val = int(round(fr[1] * len(items)))
    pick = lambda idx: tuple(sorted((items[j] for j in idx), key=lambda it: it.id))
    train = pick(order[:n_train])
    val = pick(order[n_train:n_train + n_val])
    test = pick(order[n_train + n_val:])
    anchors = AnchorPool.extract(train, scale, gamma)
    return DatasetSplit(train, val, test, anchors)


def build_pairs(queries: Sequence[Item], anchors: AnchorPool, budgets_b, mode: int,
                seed: int = 0) -> PairBatch:
    """b_i pairs per interior boundary: anchors used equally, queries drawn uniformly.

    `budgets_b` is an int (same for every interior boundary) or a mapping or
    length-n sequence indexed by boundary.  When b_i does not divide evenly,
    the first anchors in id order get one extra pair.
    """
    if mode not in (1, 2):
        raise ValueError(f"mode must be 1 or 2, got {mode}")
    if not queries:
        raise DataInsufficiencyError("no query items to pair with anchors")
    scale = anchors.scale
    rng = np.random.default_rng(seed)
    q_feats = np.stack([it.features for it in queries])
    q_latent = np.array([it.latent_value for it in queries])
    A, Q, T, B, L = [], [], [], [], []
    for i in scale.interior:
        b_i = int(budgets_b if np.isscalar(budgets_b) else budgets_b[i])
        if b_i < 1:
            raise ValueError(f"training budget for boundary {i} must be positive")
        pool = anchors.anchors(i)
        if not pool:
            raise DataInsufficiencyError(f"no anchors for boundary {i}")
        per, extra = divmod(b_i, len(pool))
        counts = np.full(len(pool), per)
        counts[:extra] += 1
        a_idx = np.repeat(np.arange(len(pool)), counts)
        q_idx = rng.integers(0, len(queries), size=b_i)
        s = scale.boundaries[i]
        x = q_latent[q_idx]
        label = (s <= x).astype(int)
        target = label.astype(float) if mode == 1 else np.array([bradley_terry_prob(v, s) for v in x])
        A.append(np.stack([pool[j].features for j in a_idx]))
        Q.append(q_feats[q_idx])
        T.append(target)
        B.append(np.full(b_i, i))
        L.append(label)
    return PairBatch(np.concatenate(A), np.concatenate(Q), np.concatenate(T),
                     np.concatenate(B), np.concatenate(L))


def build_training_pairs(split: DatasetSplit, budgets_b, mode: int, seed: int = 0) -> PairBatch:
    """Pairs from training II queries against the training anchors."""
    return build_pairs(split.training_II, split.anchors, budgets_b, mode, seed)


def build_validation_pairs(split: DatasetSplit, budgets_b, mode: int, seed: int = 0) -> PairBatch:
    """Same construction inside the validation split: anchors are pulled from it first."""
    scale, gamma = split.anchors.scale, split.anchors.gamma
    anchors = AnchorPool.extract(split.validation, scale, gamma)
    used = anchors.ids()
    queries = [it for it in split.validation if it.id not in used]
    return build_pairs(queries, anchors, budgets_b, mode, seed)


def population_csv(items: Sequence[Item], tags: dict | None = None) -> str:
    """CSV text: id, latent_value, feature_0..feature_{d-1}, split_tag."""
    d = items[0].features.size if items else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "latent_value", *[f"feature_{j}" for j in range(d)], "split_tag"])
    for it in items:
        tag = (tags or {}).get(it.id, "")
        w.writerow([it.id, f"{it.latent_value:.12g}", *[f"{v:.12g}" for v in it.features], tag])
    return buf.getvalue()


def write_population_csv(path, items: Sequence[Item], tags: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(population_csv(items, tags))


def read_population_csv(path) -> tuple[list[Item], dict]:
    items, tags = [], {}
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        fcols = [c for c in r.fieldnames if c.startswith("feature_")]
        for row in r:
            it = Item(int(row["id"]), float(row["latent_value"]),
                      np.array([float(row[c]) for c in fcols]))
            items.append(it)
            if row.get("split_tag"):
                tags[it.id] = row["split_tag"]
    return items, tags
