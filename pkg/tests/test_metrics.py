from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ordnbs.metrics import (UndefinedAUCError, accuracy, auc, kendall_tau, mae,
                            unzip_pairs, youden_threshold)


def brute_tau(p, t):
    m = len(p)
    total = 0
    for i, j in combinations(range(m), 2):
        prod = (p[i] - p[j]) * (t[i] - t[j])
        total += int(prod > 0) - int(prod < 0)
    return total / (m * (m - 1) / 2)


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum((a > b) + 0.5 * (a == b) for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


def test_accuracy_examples():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert accuracy([1, 2, 0], [0, 1, 2]) == 0.0
    assert accuracy(*unzip_pairs([(0, 0), (1, 2), (2, 2), (3, 0)])) == 0.5


def test_mae_examples():
    assert mae([1, 3], [1, 3]) == 0.0
    assert mae(*unzip_pairs([(0, 1), (1, 1)])) == 0.5
    assert mae([0], [4]) == 4.0


@pytest.mark.parametrize("fn", [accuracy, mae])
def test_empty_rejected(fn):
    with pytest.raises(ValueError):
        fn([], [])


def test_tau_examples():
    assert kendall_tau([0, 1, 2], [0, 1, 2]) == 1.0
    assert kendall_tau([2, 1, 0], [0, 1, 2]) == -1.0
    assert kendall_tau([0, 0, 1], [0, 1, 2]) == pytest.approx(2 / 3, abs=1e-15)


def test_tau_needs_two():
    with pytest.raises(ValueError):
        kendall_tau([1], [1])


labels = st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=2, max_size=40)


@given(labels)
def test_tau_matches_brute_force(pairs):
    p, t = unzip_pairs(pairs)
    assert kendall_tau(p, t) == pytest.approx(brute_tau(list(p), list(t)), abs=1e-12)


@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-3, 3)), min_size=2, max_size=30))
def test_tau_matches_brute_force_arbitrary_ints(pairs):
    p, t = unzip_pairs(pairs)
    assert kendall_tau(p, t) == pytest.approx(brute_tau(list(p), list(t)), abs=1e-12)


@given(st.lists(st.integers(0, 1000), min_size=2, max_size=30, unique=True))
def test_tau_self_and_reversed(y):
    y = np.array(y)
    assert kendall_tau(y, y) == 1.0
    assert kendall_tau(-y, y) == -1.0


@given(labels)
def test_tau_bounded_and_mae_acc_link(pairs):
    p, t = unzip_pairs(pairs)
    assert -1.0 <= kendall_tau(p, t) <= 1.0
    assert (mae(p, t) == 0) == (accuracy(p, t) == 1)


def test_auc_examples():
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_auc_single_class():
    with pytest.raises(UndefinedAUCError):
        auc([0.1, 0.2], [1, 1])


scored = st.lists(st.tuples(st.integers(0, 8).map(lambda v: v / 8), st.integers(0, 1)),
                  min_size=2, max_size=40).filter(lambda xs: 0 < sum(y for _, y in xs) < len(xs))


@given(scored)
def test_auc_matches_pair_enumeration(data):
    s, y = zip(*data)
    assert auc(s, y) == pytest.approx(brute_auc(s, y), abs=1e-12)


@given(scored)
def test_auc_complement(data):
    s, y = map(np.array, zip(*data))
    assert auc(s, y) + auc(s, 1 - y) == pytest.approx(1.0, abs=1e-12)


@given(scored)
def test_auc_invariant_under_monotone_map(data):
    s, y = map(np.array, zip(*data))
    assert auc(np.exp(3 * s) - 7, y) == pytest.approx(auc(s, y), abs=1e-12)


def test_auc_random_scores_near_half():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 10_000)
    assert auc(rng.random(10_000), y) == pytest.approx(0.5, abs=0.02)


def test_youden_threshold_separates():
    s = [0.1, 0.2, 0.3, 0.6, 0.7, 0.9]
    y = [0, 0, 0, 1, 1, 1]
    t = youden_threshold(s, y)
    assert t == 0.6
    assert accuracy((np.array(s) >= t).astype(int), y) == 1.0


@given(scored)
def test_youden_is_optimal_over_observed_cuts(data):
    s, y = map(np.array, zip(*data))
    y = y.astype(bool)

    def j(t):
        pred = s >= t
        return pred[y].mean() - pred[~y].mean()

    best = max(j(t) for t in np.unique(s))
    assert j(youden_threshold(s, y)) == pytest.approx(best, abs=1e-12)
