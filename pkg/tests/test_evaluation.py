import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidalml.evaluation import (
    EvaluationError,
    accuracy,
    auc,
    confusion_matrix,
    decision_region_grid,
    roc_binary,
    roc_macro,
    split_dataset,
    time_training,
    write_region_csv,
    write_roc_csv,
)
from tidalml.learn import fit_gaussian_nb, fit_perceptron, fit_random_forest


def mann_whitney_auc(scores, positive):
    pos, neg = scores[positive], scores[~positive]
    diff = pos[:, None] - neg[None, :]
    return (np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / diff.size


class TestSplit:
    labels = np.repeat([0, 1, 2], 1000)

    def test_counts(self):
        s = split_dataset(3000, self.labels, 0.2, seed=1)
        assert len(s.test) == 600 and len(s.train) == 2400
        assert np.bincount(self.labels[s.test]).tolist() == [200, 200, 200]

    def test_disjoint_and_covering(self):
        s = split_dataset(3000, self.labels, 0.2, seed=1)
        assert np.intersect1d(s.train, s.test).size == 0
        assert np.array_equal(np.sort(np.r_[s.train, s.test]), np.arange(3000))

    def test_deterministic(self):
        a = split_dataset(3000, self.labels, seed=9)
        b = split_dataset(3000, self.labels, seed=9)
        c = split_dataset(3000, self.labels, seed=10)
        assert np.array_equal(a.test, b.test)
        assert not np.array_equal(a.test, c.test)

    def test_tiny_class_rejected(self):
        with pytest.raises(EvaluationError):
            split_dataset(13, np.r_[np.zeros(10), np.ones(3)])


class TestMetrics:
    def test_accuracy_arithmetic(self):
        y = np.zeros(800, dtype=int)
        pred = y.copy()
        pred[0] = 1
        assert accuracy(y, pred) == 0.99875

    def test_confusion_identity(self):
        y = np.array([0, 0, 1, 2, 2, 2])
        assert np.array_equal(confusion_matrix(y, y, 3), np.diag([2, 1, 3]))
        cm = confusion_matrix(y, np.array([0, 1, 1, 2, 0, 2]), 3)
        assert cm.sum() == 6
        assert cm[0, 1] == 1 and cm[2, 0] == 1

    def test_hand_roc(self):
        scores = np.array([0.9, 0.8, 0.7, 0.6])
        positive = np.array([True, False, True, False])
        fpr, tpr, thr = roc_binary(scores, positive)
        assert fpr.tolist() == [0.0, 0.0, 0.5, 0.5, 1.0]
        assert tpr.tolist() == [0.0, 0.5, 0.5, 1.0, 1.0]
        assert thr[0] == np.inf
        assert auc(fpr, tpr) == 0.75

    def test_perfect_and_chance(self):
        pos = np.array([True] * 50 + [False] * 50)
        assert auc(*roc_binary(np.r_[np.ones(50), np.zeros(50)], pos)[:2]) == 1.0
        assert auc(*roc_binary(np.full(100, 0.3), pos)[:2]) == 0.5

    @given(st.lists(st.tuples(st.integers(0, 6), st.booleans()), min_size=2, max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_auc_equals_mann_whitney(self, rows):
        scores = np.array([r[0] for r in rows], dtype=float)
        positive = np.array([r[1] for r in rows])
        if positive.all() or not positive.any():
            return
        assert auc(*roc_binary(scores, positive)[:2]) == pytest.approx(
            mann_whitney_auc(scores, positive), abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(2)
        s = rng.normal(size=(90, 3))
        y = np.repeat([0, 1, 2], 30)
        a, b = roc_macro(s, y), roc_macro(np.exp(3 * s) + 1, y)
        assert a.macro_auc == pytest.approx(b.macro_auc, abs=1e-12)
        np.testing.assert_allclose(a.macro_tpr, b.macro_tpr, atol=1e-12)

    def test_macro_grid_and_absent_class(self):
        s = np.eye(3)[np.repeat([0, 1, 2], 4)]
        roc = roc_macro(s, np.repeat([0, 1, 2], 4))
        assert roc.macro_fpr.size == 101 and roc.macro_auc == 1.0
        assert roc.macro_tpr[0] == 0.0 and roc.macro_tpr[-1] == 1.0
        with pytest.raises(EvaluationError):
            roc_macro(s, np.zeros(12, dtype=int))

    def test_roc_csv(self, tmp_path):
        s = np.eye(3)[np.repeat([0, 1, 2], 4)]
        write_roc_csv(tmp_path / "r.csv", roc_macro(s, np.repeat([0, 1, 2], 4)), ["a", "b", "c"])
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "class,fpr,tpr"
        assert sum(line.startswith("macro,") for line in lines) == 101


class TestRegions:
    def test_constant_model(self, tmp_path):
        X = np.random.default_rng(0).normal(size=(30, 2))
        y = np.zeros(30, dtype=int)
        y[:2] = 1
        model = fit_perceptron(X, y)
        model.params["coef"] = np.zeros((2, 2))
        model.params["intercept"] = np.array([1.0, 0.0])
        grid = decision_region_grid(model, (0, 1, 0, 1), resolution=300)
        assert grid.labels.shape == (300, 300)
        assert np.all(grid.labels == 0)
        write_region_csv(tmp_path / "g.csv", grid, ["healthy", "asthma"])
        assert len((tmp_path / "g.csv").read_text().splitlines()) == 90_001

    def test_cells_follow_clusters(self, toy_clusters):
        X, y = toy_clusters
        grid = decision_region_grid(fit_gaussian_nb(X, y), data=X, resolution=50)
        x0, x1, y0, y1 = grid.bounds
        assert x0 < X[:, 0].min() and x1 > X[:, 0].max()
        ix = np.argmin(np.abs(grid.xs - 10.0))
        iy = np.argmin(np.abs(grid.ys - 0.0))
        assert grid.labels[iy, ix] == 1

    def test_bad_bounds(self, toy_clusters):
        X, y = toy_clusters
        with pytest.raises(EvaluationError):
            decision_region_grid(fit_gaussian_nb(X, y), (1, 0, 0, 1))


def test_timing_orders_cheap_before_expensive():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(600, 2)) + np.repeat([[0, 0], [2, 0], [0, 2]], 200, axis=0)
    y = np.repeat([0, 1, 2], 200)
    report = time_training(X, y, {
        "perceptron": lambda X, y: fit_perceptron(X, y, max_epochs=5),
        "random_forest": lambda X, y: fit_random_forest(X, y, n_trees=30),
    }, repetitions=3)
    med = report.median
    assert all(len(v) == 3 for v in report.durations.values())
    assert 0 < med["perceptron"] < med["random_forest"]
