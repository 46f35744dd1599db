"""Naive and interval noisy binary search over an ordinal scale.

Both searches treat p_i = P(s_i <= x) as non-increasing in i and look for
the consecutive pair whose empirical probabilities straddle 1/2.  The end
boundaries are never queried: in-range data gives p_0 = 1 and p_{n-1} = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import EmpiricalEstimate, OrdinalScale, SearchResult
from .oracles import ComparisonOracle, estimate_probability

DEFAULT_EPSILON = 0.03


def default_k1(n: int) -> int:
    return math.ceil(3 * math.log(n))


def default_k2(n: int) -> int:
    return math.ceil(12 * math.log(n))


@dataclass
class NbsParams:
    """Search parameters.

    budgets[i] is the number of comparisons spent each time boundary i is
    estimated; entries for the two end boundaries are ignored.
    """

    budgets: Sequence[int]
    epsilon: float = DEFAULT_EPSILON
    k1: int | None = None
    k2: int | None = None

    def __post_init__(self):
        self.budgets = tuple(int(b) for b in self.budgets)
        if not 0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")
        n = len(self.budgets)
        if n < 2:
            raise ValueError("budgets must cover at least two boundaries")
        if any(b < 1 for b in self.budgets[1:-1]):
            raise ValueError(f"interior budgets must be positive: {self.budgets}")
        if self.k1 is None:
            self.k1 = default_k1(n)
        if self.k2 is None:
            self.k2 = default_k2(n)
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("k1 and k2 must be positive")

    @classmethod
    def uniform(cls, n: int, h: int, **kw) -> "NbsParams":
        return cls([0] + [h] * (n - 2) + [0], **kw)


def budget_fractions(aucs: Sequence[float]) -> np.ndarray:
    """Share of the budget per interior boundary, proportional to 1 - AUC."""
    a = np.asarray(aucs, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise ValueError("need at least one interior boundary AUC")
    if np.any((a <= 0) | (a > 1)):
        raise ValueError(f"AUCs must lie in (0, 1]: {a}")
    miss = 1.0 - a
    total = miss.sum()
    if total <= 0:
        raise ZeroDivisionError("every AUC is 1; budget fractions are undefined")
    return miss / total


def allocate_budget(H: int, aucs: Sequence[float], min_budget: int = 0) -> list[int]:
    """Integer per-boundary budgets summing to H, endpoints receiving 0.

    Interior shares follow `budget_fractions`; rounding is largest remainder
    with ties going to the lower boundary index.  With `min_budget` > 0 every
    interior boundary is first given that many comparisons and only the rest
    of H is split by the fractions.
    """
    if H < 1:
        raise ValueError(f"budget H must be positive, got {H}")
    frac = budget_fractions(aucs)
    reserved = min_budget * frac.size
    if min_budget < 0 or reserved > H:
        raise ValueError(f"cannot give {frac.size} boundaries {min_budget} each out of H={H}")
    raw = frac * (H - reserved)
    base = np.floor(raw).astype(int)
    short = H - reserved - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    return [0, *(base + min_budget).tolist(), 0]


def search_budget(H: int, aucs: Sequence[float]) -> list[int]:
    """`allocate_budget`, falling back to one reserved comparison per boundary
    when plain rounding would leave an interior boundary with none."""
    b = allocate_budget(H, aucs)
    return b if min(b[1:-1]) > 0 else allocate_budget(H, aucs, min_budget=1)


class _Estimator:
    """Estimates p_i through the oracle while recording the trajectory."""

    def __init__(self, oracle: ComparisonOracle, n: int, budgets: Sequence[int]):
        self.oracle = oracle
        self.n = n
        self.budgets = budgets
        self.trajectory: list[tuple[int, EmpiricalEstimate]] = []

    def __call__(self, i: int) -> float:
        if i == 0:
            return 1.0
        if i == self.n - 1:
            return 0.0
        est = estimate_probability(self.oracle, i, self.budgets[i])
        self.trajectory.append((i, est))
        return est.p_hat


def _nnbs(estimate: _Estimator, seq: Sequence[int], epsilon: float) -> tuple[int, int]:
    """Binary search over the sorted boundary indices in seq; returns (category, steps)."""
    a, b = 0, len(seq) - 1
    steps = 0
    while b - a > 1:
        c = (a + b) // 2
        p = estimate(seq[c])
        steps += 1
        if abs(p - 0.5) <= epsilon:
            return seq[c], steps
        if p > 0.5 + epsilon:
            a = c
        else:
            b = c
    return seq[a], steps


def _check_scale(oracle, scale, params):
    if len(params.budgets) != scale.n:
        raise ValueError(f"{len(params.budgets)} budgets for {scale.n} boundaries")
    if oracle.n_boundaries != scale.n:
        raise ValueError(f"oracle covers {oracle.n_boundaries} boundaries, scale has {scale.n}")


def nnbs(oracle: ComparisonOracle, scale: OrdinalScale, params: NbsParams) -> SearchResult:
    _check_scale(oracle, scale, params)
    est = _Estimator(oracle, scale.n, params.budgets)
    cat, steps = _nnbs(est, range(scale.n), params.epsilon)
    return SearchResult(cat, tuple(est.trajectory), steps)


@dataclass
class IntervalNode:
    lo: int
    hi: int
    parent: "IntervalNode | None" = field(default=None, repr=False)
    left: "IntervalNode | None" = field(default=None, repr=False)
    right: "IntervalNode | None" = field(default=None, repr=False)

    @property
    def is_leaf(self) -> bool:
        return self.hi - self.lo == 1

    @property
    def mid(self) -> int:
        return (self.lo + self.hi) // 2


def build_interval_tree(n: int) -> IntervalNode:
    """Root spans [0, n-1]; [l, r] splits into [l, m] and [m, r], m = (l+r)//2."""
    if n < 2:
        raise ValueError("need at least two boundaries")

    def build(lo, hi, parent):
        node = IntervalNode(lo, hi, parent)
        if not node.is_leaf:
            node.left = build(lo, node.mid, node)
            node.right = build(node.mid, hi, node)
        return node

    return build(0, n - 1, None)


def inbs(oracle: ComparisonOracle, scale: OrdinalScale, params: NbsParams) -> SearchResult:
    """Tree walk with backtracking; falls back to NNBS on visited boundaries after k2 steps."""
    _check_scale(oracle, scale, params)
    est = _Estimator(oracle, scale.n, params.budgets)
    root = build_interval_tree(scale.n)
    node = root
    counter = 0
    visited = {0, scale.n - 1}
    for step in range(1, params.k2 + 1):
        visited.update((node.lo, node.hi))
        if node.is_leaf:
            p_lo, p_hi = est(node.lo), est(node.hi)
            counter += 1 if p_hi <= 0.5 <= p_lo else -1
            if counter >= params.k1:
                return SearchResult(node.lo, tuple(est.trajectory), step)
            if counter < 0:
                node = node.parent or root
                counter = 0
            continue
        p_lo, p_hi = est(node.lo), est(node.hi)
        if p_lo < 0.5 or p_hi > 0.5:
            node = node.parent or root
            continue
        visited.add(node.mid)
        node = node.right if est(node.mid) > 0.5 else node.left
        counter = 0
    cat, extra = _nnbs(est, sorted(visited), params.epsilon)
    return SearchResult(cat, tuple(est.trajectory), params.k2 + extra, fell_back=True)


ALGORITHMS = {"nnbs": nnbs, "inbs": inbs}
