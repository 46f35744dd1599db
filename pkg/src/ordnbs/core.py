"""Shared domain types: ordinal scale, items, anchor pools, search results."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

WHO_BMI_BOUNDARIES = (16.0, 18.5, 25.0, 30.0, 35.0, 40.0)
WHO_BMI_CATEGORIES = (
    "Underweight",
    "Normal",
    "Overweight",
    "Moderately obese",
    "Severely obese",
)
DEFAULT_GAMMA = 0.3


class OutOfRangeError(ValueError):
    pass


class DataInsufficiencyError(ValueError):
    pass


@dataclass(frozen=True)
class OrdinalScale:
    """Ascending boundaries s_0 < ... < s_{n-1} inducing n-1 categories.

    Category i is the half-open interval [s_i, s_{i+1}); the top category is
    closed on the right so every value in [s_0, s_{n-1}] has a category.
    """

    boundaries: tuple[float, ...]
    category_names: tuple[str, ...] | None = None

    def __post_init__(self):
        b = tuple(float(v) for v in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if len(b) < 2:
            raise ValueError("an ordinal scale needs at least two boundaries")
        if any(not np.isfinite(v) for v in b):
            raise ValueError("boundaries must be finite")
        if any(hi <= lo for lo, hi in zip(b, b[1:])):
            raise ValueError(f"boundaries must be strictly ascending: {b}")
        if self.category_names is not None:
            names = tuple(self.category_names)
            if len(names) != len(b) - 1:
                raise ValueError(
                    f"expected {len(b) - 1} category names, got {len(names)}"
                )
            object.__setattr__(self, "category_names", names)

    @classmethod
    def who_bmi(cls) -> "OrdinalScale":
        return cls(WHO_BMI_BOUNDARIES, WHO_BMI_CATEGORIES)

    @property
    def n(self) -> int:
        return len(self.boundaries)

    @property
    def n_categories(self) -> int:
        return len(self.boundaries) - 1

    @property
    def interior(self) -> range:
        """Indices of the boundaries that carry comparisons (1 .. n-2)."""
        return range(1, self.n - 1)

    @property
    def low(self) -> float:
        return self.boundaries[0]

    @property
    def high(self) -> float:
        return self.boundaries[-1]

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high

    def check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"boundary index {i} outside [0, {self.n - 1}]")


def category_of(scale: OrdinalScale, value: float) -> int:
    """Index i with s_i <= value < s_{i+1}; value == s_{n-1} maps to n-2."""
    value = float(value)
    if not scale.contains(value):
        raise OutOfRangeError(
            f"value {value} outside [{scale.low}, {scale.high}]"
        )
    return min(bisect.bisect_right(scale.boundaries, value) - 1, scale.n - 2)


def categories_of(scale: OrdinalScale, values) -> np.ndarray:
    """Vectorized `category_of`."""
    values = np.asarray(values, dtype=float)
    if values.size and (values.min() < scale.low or values.max() > scale.high):
        raise OutOfRangeError(f"values outside [{scale.low}, {scale.high}]")
    idx = np.searchsorted(np.asarray(scale.boundaries), values, side="right") - 1
    return np.minimum(idx, scale.n - 2).astype(int)


@dataclass(frozen=True)
class Item:
    id: int
    latent_value: float
    features: np.ndarray = field(repr=False)

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        f.setflags(write=False)
        object.__setattr__(self, "features", f)


@dataclass(frozen=True)
class AnchorPool:
    """Anchor items per interior boundary index.

    `per_boundary[i]` holds items whose latent value lies in
    [s_i - gamma, s_i + gamma].
    """

    scale: OrdinalScale
    per_boundary: dict[int, tuple[Item, ...]]
    gamma: float = DEFAULT_GAMMA
    _matrices: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        pools = {int(i): tuple(items) for i, items in self.per_boundary.items()}
        for i in self.scale.interior:
            if not pools.get(i):
                raise DataInsufficiencyError(
                    f"no anchors for boundary {i} (s={self.scale.boundaries[i]})"
                )
        for i, items in pools.items():
            s = self.scale.boundaries[i]
            for it in items:
                if abs(it.latent_value - s) > self.gamma:
                    raise ValueError(
                        f"anchor {it.id} (latent {it.latent_value}) is farther "
                        f"than gamma={self.gamma} from boundary {s}"
                    )
        object.__setattr__(self, "per_boundary", pools)
        object.__setattr__(self, "_matrices", {})

    @classmethod
    def extract(
        cls, items: Sequence[Item], scale: OrdinalScale, gamma: float = DEFAULT_GAMMA
    ) -> "AnchorPool":
        pools: dict[int, list[Item]] = {i: [] for i in scale.interior}
        for it in items:
            for i in scale.interior:
                if abs(it.latent_value - scale.boundaries[i]) <= gamma:
                    pools[i].append(it)
        for i in pools:
            pools[i].sort(key=lambda it: it.id)
        return cls(scale, {i: tuple(v) for i, v in pools.items()}, gamma)

    def anchors(self, i: int) -> tuple[Item, ...]:
        try:
            return self.per_boundary[i]
        except KeyError:
            raise IndexError(f"no anchor pool for boundary {i}") from None

    def ids(self) -> set:
        return {it.id for items in self.per_boundary.values() for it in items}

    def feature_matrix(self, i: int) -> np.ndarray:
        m = self._matrices.get(i)
        if m is None:
            m = np.stack([it.features for it in self.anchors(i)])
            m.setflags(write=False)
            self._matrices[i] = m
        return m


@dataclass(frozen=True)
class EmpiricalEstimate:
    """Fraction of 1-outcomes over `trials` comparisons."""

    ones: int
    trials: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("an estimate needs at least one trial")
        if not 0 <= self.ones <= self.trials:
            raise ValueError(f"ones={self.ones} outside [0, {self.trials}]")

    @property
    def p_hat(self) -> float:
        return self.ones / self.trials


@dataclass(frozen=True)
class SearchResult:
    category_index: int
    trajectory: tuple[tuple[int, EmpiricalEstimate], ...] = ()
    steps: int = 0
    fell_back: bool = False

    @property
    def queries_used(self) -> int:
        return sum(est.trials for _, est in self.trajectory)

    @property
    def visited(self) -> list[int]:
        return [i for i, _ in self.trajectory]
