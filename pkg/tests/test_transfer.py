"""Metrics against independent oracles; probe training on separable data."""

import numpy as np
import pytest

from dapt import rng as rngmod
from dapt.transfer import (ProbeConfig, ProbeTask, accuracy, auroc,
                           evaluate_probe, pearson, spearman,
                           train_linear_probe)


def _pairwise_auroc(scores, labels):
    """O(n^2) counting definition: ties give half credit."""
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg)) * 100.0


def test_auroc_four_point_oracle():
    scores = np.array([0.1, 0.4, 0.35, 0.8])
    labels = np.array([0, 0, 1, 1])
    assert auroc(scores, labels) == 75.0
    assert auroc(-scores, labels) == 25.0


def test_auroc_degenerate_orderings():
    labels = np.array([0, 0, 1, 1])
    assert auroc(np.array([1, 2, 3, 4]), labels) == 100.0
    assert auroc(np.array([4, 3, 2, 1]), labels) == 0.0
    assert auroc(np.zeros(4), labels) == 50.0    # all tied


def test_auroc_matches_pairwise_counting_exactly():
    r = rngmod.stream(0, 0)
    for trial in range(50):
        n = int(r.integers(4, 60))
        scores = r.integers(0, 8, size=n).astype(np.float64)  # heavy ties
        labels = np.zeros(n, dtype=np.int64)
        labels[r.choice(n, size=int(r.integers(1, n)), replace=False)] = 1
        if labels.sum() in (0, n):
            continue
        assert auroc(scores, labels) == _pairwise_auroc(scores, labels)


def test_auroc_validates_inputs():
    with pytest.raises(ValueError):
        auroc(np.array([1.0, 2.0]), np.array([1, 1]))
    with pytest.raises(ValueError):
        auroc(np.array([1.0, 2.0]), np.array([0, 2]))


def test_pearson_matches_numpy_corrcoef():
    r = rngmod.stream(1, 0)
    a = r.normal(size=50)
    b = 0.3 * a + r.normal(size=50)
    assert abs(pearson(a, b) - np.corrcoef(a, b)[0, 1]) < 1e-12
    assert abs(pearson(a, 2 * a + 3) - 1.0) < 1e-12
    assert abs(pearson(a, -a) + 1.0) < 1e-12


def test_spearman_is_rank_pearson():
    a = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    b = np.array([1.0, 4.0, 9.0, 16.0, 25.0])   # monotone map
    assert abs(spearman(a, b) - 1.0) < 1e-12
    from scipy.stats import spearmanr
    r = rngmod.stream(1, 1)
    x = r.normal(size=40)
    y = r.normal(size=40)
    assert abs(spearman(x, y) - spearmanr(x, y).statistic) < 1e-10


def test_correlations_validate_inputs():
    with pytest.raises(ValueError):
        pearson(np.ones(5), np.arange(5.0))     # constant input
    with pytest.raises(ValueError):
        pearson(np.arange(3.0), np.arange(4.0))


def test_accuracy_percent():
    assert accuracy(np.array([1, 2, 3, 4]), np.array([1, 2, 0, 4])) == 75.0


def test_task_validation():
    with pytest.raises(ValueError):
        ProbeTask(name="t", kind="ranking")
    with pytest.raises(ValueError):
        ProbeTask(name="t", kind="multiclass", num_classes=1)
    assert ProbeTask(name="t", kind="binary").output_dim == 1
    assert ProbeTask(name="t", kind="multiclass", num_classes=7).output_dim == 7


def _separable(n=300, d=16, classes=4, seed=3):
    r = rngmod.stream(seed, 0)
    labels = r.integers(0, classes, size=n)
    centers = r.normal(size=(classes, d)) * 4
    feats = centers[labels] + r.normal(size=(n, d)) * 0.3
    return feats.astype(np.float32), labels


def test_probe_learns_separable_multiclass_features():
    feats, labels = _separable()
    task = ProbeTask(name="toy", kind="multiclass", num_classes=4)
    result = train_linear_probe(feats, labels, task,
                                ProbeConfig(lr=1e-2, epochs=40, batch_size=64))
    metrics = evaluate_probe(result, feats, labels)
    assert metrics["accuracy"] > 95.0
    assert result.train_losses[-1] < result.train_losses[0]


def test_probe_is_deterministic():
    feats, labels = _separable(n=120)
    task = ProbeTask(name="toy", kind="multiclass", num_classes=4)
    cfg = ProbeConfig(lr=1e-3, epochs=5, batch_size=32, seed=9)
    r1 = train_linear_probe(feats, labels, task, cfg)
    r2 = train_linear_probe(feats, labels, task, cfg)
    assert np.array_equal(r1.weights, r2.weights)
    assert r1.train_losses == r2.train_losses


def test_probe_binary_and_regression_heads():
    r = rngmod.stream(4, 0)
    feats = r.normal(size=(200, 8)).astype(np.float32)
    w = r.normal(size=8)
    margin = feats @ w
    labels = (margin > 0).astype(np.int64)
    task = ProbeTask(name="b", kind="binary")
    res = train_linear_probe(feats, labels, task,
                             ProbeConfig(lr=1e-2, epochs=30, batch_size=50))
    assert evaluate_probe(res, feats, labels)["auroc"] > 95.0

    target = margin + 0.1 * r.normal(size=200)
    task = ProbeTask(name="r", kind="regression")
    res = train_linear_probe(feats, target, task,
                             ProbeConfig(lr=1e-2, epochs=60, batch_size=50))
    metrics = evaluate_probe(res, feats, target)
    assert metrics["pearson"] > 95.0 and metrics["spearman"] > 90.0


def test_probe_validates_labels():
    feats = np.zeros((4, 3), dtype=np.float32)
    task = ProbeTask(name="t", kind="multiclass", num_classes=2)
    with pytest.raises(ValueError):
        train_linear_probe(feats, np.array([0, 1, 2, 0]), task)
