"""Ordinal-regression metrics (ACC, MAE, Kendall tau) and rank-based AUC."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata


class UndefinedAUCError(ValueError):
    pass


class LabelPair(NamedTuple):
    predicted: int
    truth: int


def unzip_pairs(pairs) -> tuple[np.ndarray, np.ndarray]:
    if len(pairs) == 0:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    arr = np.asarray(pairs, dtype=int)
    return arr[:, 0], arr[:, 1]


def _labels(predicted, truth, min_size=1):
    p = np.asarray(predicted).ravel()
    t = np.asarray(truth).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predicted vs {t.size} truth")
    if p.size < min_size:
        raise ValueError(f"need at least {min_size} labelled samples, got {p.size}")
    return p, t


def accuracy(predicted, truth) -> float:
    p, t = _labels(predicted, truth)
    return float(np.mean(p == t))


def mae(predicted, truth) -> float:
    p, t = _labels(predicted, truth)
    return float(np.mean(np.abs(p.astype(float) - t.astype(float))))


def concordance_sum(predicted, truth) -> int:
    """Sum over i<j of sign((p_i - p_j)(t_i - t_j)); ties contribute 0.

    Counts come from the joint contingency table of the two label vectors,
    which is cheap because ordinal labels take few distinct values.
    """
    p, t = _labels(predicted, truth)
    _, pi = np.unique(p, return_inverse=True)
    _, ti = np.unique(t, return_inverse=True)
    table = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(table, (pi.ravel(), ti.ravel()), 1)
    # below[a, b] = number of samples with predicted < a and truth < b
    cum = table.cumsum(axis=0).cumsum(axis=1)
    below = np.zeros_like(table)
    below[1:, 1:] = cum[:-1, :-1]
    # above_left[a, b] = number with predicted < a and truth > b
    col_cum = table.cumsum(axis=0)
    prev_rows = np.zeros_like(table)
    prev_rows[1:] = col_cum[:-1]
    rev = prev_rows[:, ::-1].cumsum(axis=1)[:, ::-1]
    above_left = np.zeros_like(table)
    above_left[:, :-1] = rev[:, 1:]
    concordant = int(np.sum(table * below))
    discordant = int(np.sum(table * above_left))
    return concordant - discordant


def kendall_tau(predicted, truth) -> float:
    """Kendall tau-a: concordance sum over all m(m-1)/2 pairs."""
    p, t = _labels(predicted, truth, min_size=2)
    m = p.size
    return concordance_sum(p, t) / (m * (m - 1) / 2)


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with average ranks, so ties count one half."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs both classes present")
    ranks = rankdata(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def youden_threshold(scores, labels) -> float:
    """Threshold t maximizing TPR - FPR under the rule score >= t -> 1."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("threshold selection needs both classes present")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    tp = np.cumsum(y[order])
    fp = np.cumsum(~y[order])
    # only cut after the last of a run of tied scores
    last = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    j = tp[last] / n_pos - fp[last] / n_neg
    return float(s_sorted[last][int(np.argmax(j))])
