"""Noisy pairwise-comparison oracles.

Every oracle answers "is s_i <= x?" for a boundary index i with a bit, where
1 asserts s_i <= x.  Repeated answers are i.i.d. draws from the oracle's own
seeded stream, so an oracle behaves like the coin attached to s_i.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import AnchorPool, EmpiricalEstimate, OrdinalScale


def bradley_terry_prob(x: float, s: float) -> float:
    """P(x beats s) = x / (x + s) for positive strengths."""
    x = float(x)
    s = float(s)
    if not (x > 0 and s > 0):
        raise ValueError(f"Bradley-Terry strengths must be positive, got {x}, {s}")
    return x / (x + s)


class ComparisonOracle:
    """Base class; subclasses implement `_ones(i, h)`.

    `_ones` returns the number of 1-outcomes in h fresh comparisons against
    boundary i.  Index validation and query accounting live here.
    """

    n_boundaries: int

    def __init__(self, n_boundaries: int, rng_seed=None):
        self.n_boundaries = int(n_boundaries)
        self.rng_seed = rng_seed
        self.rng = np.random.default_rng(rng_seed)
        self.query_count = 0

    def _check(self, i: int) -> None:
        if not 0 <= i < self.n_boundaries:
            raise IndexError(
                f"boundary index {i} outside [0, {self.n_boundaries - 1}]"
            )

    def _ones(self, i: int, h: int) -> int:
        raise NotImplementedError

    def compare(self, i: int) -> int:
        self._check(i)
        bit = int(self._ones(i, 1))
        self.query_count += 1
        return bit

    def sample(self, i: int, h: int) -> int:
        """Number of 1-outcomes over h comparisons with boundary i."""
        self._check(i)
        if h < 1:
            raise ValueError(f"number of comparisons must be >= 1, got {h}")
        ones = int(self._ones(i, int(h)))
        self.query_count += int(h)
        return ones


def compare(oracle: ComparisonOracle, i: int) -> int:
    return oracle.compare(i)


def estimate_probability(oracle: ComparisonOracle, i: int, h: int) -> EmpiricalEstimate:
    """Empirical fraction of comparisons asserting s_i <= x over h calls."""
    if h < 1:
        raise ValueError(f"h must be a positive integer, got {h}")
    return EmpiricalEstimate(oracle.sample(i, h), int(h))


class CoinFlipOracle(ComparisonOracle):
    """Boundary i is a coin with heads probability head_probs[i]."""

    def __init__(self, head_probs: Sequence[float], rng_seed=None):
        p = np.asarray(head_probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("need at least two head probabilities")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("head probabilities must lie in [0, 1]")
        if np.any(np.diff(p) > 0):
            raise ValueError("head probabilities must be non-increasing")
        super().__init__(p.size, rng_seed)
        self.head_probs = p

    def _ones(self, i, h):
        return np.count_nonzero(self.rng.random(h) < self.head_probs[i])


class ThresholdFlipOracle(ComparisonOracle):
    """True indicator [s_i <= x] flipped with probability flip_prob."""

    def __init__(self, scale: OrdinalScale, x_latent: float, flip_prob: float = 0.0, rng_seed=None):
        if not 0 <= flip_prob < 0.5:
            raise ValueError(f"flip_prob must lie in [0, 0.5), got {flip_prob}")
        super().__init__(scale.n, rng_seed)
        self.scale = scale
        self.x_latent = float(x_latent)
        self.flip_prob = float(flip_prob)
        self._truth = np.asarray(scale.boundaries) <= self.x_latent

    def _ones(self, i, h):
        if self.flip_prob == 0:
            return h if self._truth[i] else 0
        flips = np.count_nonzero(self.rng.random(h) < self.flip_prob)
        return h - flips if self._truth[i] else flips


class BradleyTerryOracle(ComparisonOracle):
    """Emits 1 with probability x / (x + s_i)."""

    def __init__(self, scale: OrdinalScale, x_latent: float, rng_seed=None):
        if x_latent <= 0 or scale.low <= 0:
            raise ValueError("Bradley-Terry oracle needs positive latent and boundaries")
        super().__init__(scale.n, rng_seed)
        self.scale = scale
        self.x_latent = float(x_latent)
        self._p = np.array([bradley_terry_prob(self.x_latent, s) for s in scale.boundaries])

    def _ones(self, i, h):
        return np.count_nonzero(self.rng.random(h) < self._p[i])


class ComparatorOracle(ComparisonOracle):
    """Compares a query against a uniformly drawn anchor of boundary i.

    Anchors are drawn with replacement.  The comparator's verdict for each
    (anchor, query) pair is deterministic, so verdicts are computed once per
    boundary and shared between clones made with `reseeded`.
    """

    def __init__(self, comparator, anchor_pool: AnchorPool, query_features,
                 classification_threshold: float | None = None, rng_seed=None,
                 _verdicts: dict | None = None):
        super().__init__(anchor_pool.scale.n, rng_seed)
        self.comparator = comparator
        self.anchor_pool = anchor_pool
        self.query_features = np.asarray(query_features, dtype=float)
        if classification_threshold is None:
            classification_threshold = comparator.threshold
        self.classification_threshold = float(classification_threshold)
        self._verdicts = {} if _verdicts is None else _verdicts

    def verdicts(self, i: int) -> np.ndarray:
        v = self._verdicts.get(i)
        if v is None:
            anchors = self.anchor_pool.feature_matrix(i)
            queries = np.broadcast_to(self.query_features, anchors.shape)
            probs = self.comparator.forward(anchors, queries)
            v = probs >= self.classification_threshold
            self._verdicts[i] = v
        return v

    def _ones(self, i, h):
        v = self.verdicts(i)
        return np.count_nonzero(v[self.rng.integers(0, v.size, size=h)])

    @staticmethod
    def verdict_tables(comparator, anchor_pool: AnchorPool, query_matrix,
                       threshold: float) -> dict[int, np.ndarray]:
        """Boolean (n_queries, n_anchors) verdicts per interior boundary."""
        return {i: comparator.forward_grid(anchor_pool.feature_matrix(i), query_matrix) >= threshold
                for i in anchor_pool.per_boundary}

    def reseeded(self, rng_seed) -> "ComparatorOracle":
        return ComparatorOracle(
            self.comparator, self.anchor_pool, self.query_features,
            self.classification_threshold, rng_seed, _verdicts=self._verdicts,
        )
