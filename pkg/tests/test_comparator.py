import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ordnbs.comparator import (OptimizerParams, PairBatch, PairwiseComparator, TrainingError,
                               TrainingPair, evaluate_comparator, forward, gradient, load_model,
                               loss, loss_and_gradient, save_model, select_threshold, train)


def batch(a, x, t, boundary=1):
    a, x = np.atleast_2d(a).astype(float), np.atleast_2d(x).astype(float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return PairBatch(a, x, t, np.full(t.size, boundary), (t >= 0.5).astype(int))


def one_d(head, bias=0.0, mode=1):
    return PairwiseComparator(np.array([[1.0]]), np.array(head, dtype=float), bias, mode)


def test_forward_hand_example():
    # za = zx = 1, logit = 1 + 1 + 1*1*1 = 3
    m = one_d([1, 1, 1])
    assert forward(m, [1.0], [1.0]) == pytest.approx(0.9525741268, abs=1e-10)


def test_forward_shapes():
    m = PairwiseComparator.init(d=8, k=4, seed=0)
    rng = np.random.default_rng(0)
    A, X = rng.normal(size=(5, 8)), rng.normal(size=(5, 8))
    assert isinstance(m.forward(A[0], X[0]), float)
    out = m.forward(A, X)
    assert out.shape == (5,) and np.all((out > 0) & (out < 1))
    grid = m.forward_grid(A[:3], X)
    assert grid.shape == (5, 3)
    assert grid[4, 2] == pytest.approx(m.forward(A[2], X[4]), abs=1e-14)
    with pytest.raises(ValueError):
        m.forward(np.zeros(7), np.zeros(7))


def test_weight_tying_swaps_roles():
    # with head_a = -head_x and no bias the output flips to 1 - g when inputs swap
    rng = np.random.default_rng(1)
    W = rng.normal(size=(3, 4))
    h = rng.normal(size=3)
    m = PairwiseComparator(W, np.concatenate([h, -h, [0.0]]), 0.0)
    a, x = rng.normal(size=4), rng.normal(size=4)
    assert m.forward(a, x) + m.forward(x, a) == pytest.approx(1.0, abs=1e-12)


def test_loss_values():
    assert loss(one_d([0, 0, 0]), batch([1.0], [2.0], 1.0)) == pytest.approx(math.log(2), abs=1e-12)
    # bias log 9 gives g = 0.9 for every input
    m = one_d([0, 0, 0], bias=math.log(9))
    assert loss(m, batch([1.0], [2.0], 1.0)) == pytest.approx(0.10536051565782628, abs=1e-12)
    m2 = one_d([0, 0, 0], bias=math.log(9), mode=2)
    assert loss(m2, batch([1.0], [2.0], 0.6)) == pytest.approx(0.09, abs=1e-12)


def test_mode1_loss_is_clipped():
    m = one_d([0, 0, 0], bias=80.0)
    assert loss(m, batch([0.0], [0.0], 0.0)) == pytest.approx(-math.log(1e-7), rel=1e-9)


def _numeric_grad(model, b, eps=1e-5):
    theta = model.flat()
    out = np.empty_like(theta)
    for j in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[j] += eps
        dn[j] -= eps
        mu, md = model.copy(), model.copy()
        mu.set_flat(up)
        md.set_flat(dn)
        out[j] = (loss(mu, b) - loss(md, b)) / (2 * eps)
    return out


@pytest.mark.parametrize("mode", [1, 2])
def test_gradient_matches_finite_differences(mode):
    rng = np.random.default_rng(mode)
    for draw in range(20):
        m = PairwiseComparator.init(d=5, k=3, mode=mode, seed=draw)
        m.bias = rng.normal()
        n = 12
        t = rng.integers(0, 2, n).astype(float) if mode == 1 else rng.uniform(0.2, 0.8, n)
        b = batch(rng.normal(size=(n, 5)), rng.normal(size=(n, 5)), t)
        analytic = gradient(m, b).flat()
        numeric = _numeric_grad(m, b)
        scale = max(np.abs(numeric).max(), 1e-8)
        assert np.max(np.abs(analytic - numeric)) / scale < 1e-4


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_duplicated_batch_same_gradient(seed):
    rng = np.random.default_rng(seed)
    m = PairwiseComparator.init(d=3, k=2, seed=seed)
    b = batch(rng.normal(size=(6, 3)), rng.normal(size=(6, 3)), rng.integers(0, 2, 6))
    doubled = PairBatch(*(np.concatenate([f, f]) for f in
                          (b.anchors, b.queries, b.targets, b.boundaries, b.labels)))
    l1, g1 = loss_and_gradient(m, b)
    l2, g2 = loss_and_gradient(m, doubled)
    assert l1 == pytest.approx(l2, abs=1e-12)
    np.testing.assert_allclose(g1.flat(), g2.flat(), atol=1e-12)


def test_pairbatch_roundtrip():
    rng = np.random.default_rng(0)
    b = batch(rng.normal(size=(4, 2)), rng.normal(size=(4, 2)), [0, 1, 1, 0], boundary=3)
    again = PairBatch.from_pairs(b.to_pairs())
    for f in ("anchors", "queries", "targets", "boundaries", "labels"):
        np.testing.assert_array_equal(getattr(b, f), getattr(again, f))
    assert TrainingPair(np.zeros(2), np.zeros(2), 0.7, 1).label == 1


def _separable(n, d, seed):
    """Feature 0 is the latent value itself, the rest is noise."""
    rng = np.random.default_rng(seed)
    a_lat = rng.choice([-1.0, 0.0, 1.0], size=n)
    x_lat = rng.uniform(-2, 2, size=n)
    a = np.column_stack([a_lat, rng.normal(size=(n, d - 1))])
    x = np.column_stack([x_lat, rng.normal(size=(n, d - 1))])
    return batch(a, x, (a_lat <= x_lat).astype(float))


def test_learning_rate_zero_is_identity():
    m = PairwiseComparator.init(d=4, k=2, seed=0)
    best, log = train(m, _separable(200, 4, 0), _separable(100, 4, 1),
                      OptimizerParams(learning_rate=0.0, max_epochs=5, patience=10))
    np.testing.assert_array_equal(best.flat(), m.flat())
    assert len(log.train_loss) == 6
    assert len(set(log.val_loss)) == 1


def test_training_separates_clean_data():
    m = PairwiseComparator.init(d=4, k=2, seed=0)
    best, log = train(m, _separable(3000, 4, 0), _separable(1000, 4, 1),
                      OptimizerParams(max_epochs=100, patience=10))
    assert log.val_loss[log.best_epoch] == min(log.val_loss)
    reports = evaluate_comparator(best, _separable(2000, 4, 2), 0.5)
    assert all(r.auc >= 0.99 for r in reports)


def test_training_reproducible():
    m = PairwiseComparator.init(d=4, k=2, seed=0)
    p = OptimizerParams(max_epochs=5)
    a, la = train(m, _separable(500, 4, 0), _separable(200, 4, 1), p)
    b, lb = train(m, _separable(500, 4, 0), _separable(200, 4, 1), p)
    np.testing.assert_array_equal(a.flat(), b.flat())
    assert la == lb


def test_non_finite_loss_raises():
    m = PairwiseComparator.init(d=4, k=2, mode=2, seed=0)
    bad = _separable(50, 4, 0)
    bad.queries[3, 1] = np.nan
    with pytest.raises(TrainingError):
        train(m, bad, _separable(100, 4, 1), OptimizerParams(max_epochs=2))


def test_training_log_csv(tmp_path):
    m = PairwiseComparator.init(d=4, k=2, seed=0)
    _, log = train(m, _separable(200, 4, 0), _separable(100, 4, 1), OptimizerParams(max_epochs=3))
    path = tmp_path / "log.csv"
    log.write_csv(path)
    text = path.read_text()
    assert text.endswith("\n")
    lines = text.splitlines()
    assert lines[0] == "epoch,train_loss,val_loss"
    assert len(lines) == len(log.train_loss) + 1


def test_save_load_roundtrip(tmp_path):
    m = PairwiseComparator.init(d=8, k=4, mode=2, seed=5)
    m.bias, m.threshold = -0.123456789012345, 0.4375
    path = tmp_path / "m.txt"
    save_model(m, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.flat(), m.flat())
    assert (back.mode, back.threshold) == (2, 0.4375)
    path.write_text("garbage\n")
    with pytest.raises(ValueError):
        load_model(path)


def test_single_class_boundary_has_no_auc():
    rng = np.random.default_rng(0)
    m = PairwiseComparator.init(d=2, k=1, seed=0)
    b1 = batch(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)), [1, 1, 1, 1, 1], boundary=1)
    b2 = batch(rng.normal(size=(4, 2)), rng.normal(size=(4, 2)), [0, 1, 0, 1], boundary=2)
    both = PairBatch(*(np.concatenate([f, g]) for f, g in zip(
        (b1.anchors, b1.queries, b1.targets, b1.boundaries, b1.labels),
        (b2.anchors, b2.queries, b2.targets, b2.boundaries, b2.labels))))
    reports = {r.boundary_index: r for r in evaluate_comparator(m, both, 0.5)}
    assert reports[1].auc is None and reports[1].n_pairs == 5
    assert reports[2].auc is not None


def test_constant_half_predictor_balanced_accuracy():
    # all-zero weights output exactly 0.5; with threshold 0.5 every pair is called 1
    m = PairwiseComparator(np.zeros((2, 3)), np.zeros(5), 0.0)
    rng = np.random.default_rng(0)
    b = batch(rng.normal(size=(10, 3)), rng.normal(size=(10, 3)), [0, 1] * 5)
    (r,) = evaluate_comparator(m, b, 0.5)
    assert r.accuracy == 0.5 and r.auc == 0.5


def test_select_threshold_modes():
    m = one_d([-10, 10, 0], mode=1)
    b = batch([[0.0]] * 4, [[-1.0], [-0.5], [0.5], [1.0]], [0, 0, 1, 1])
    t = select_threshold(m, b)
    assert 0 < t <= m.forward([0.0], [0.5])
    m.mode = 2
    assert select_threshold(m, b) == 0.5
