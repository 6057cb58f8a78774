import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidalml.learn import (
    FitError,
    NotFittedError,
    TrainedModel,
    apply_scaler,
    fit_gaussian_nb,
    fit_logreg,
    fit_perceptron,
    fit_random_forest,
    fit_scaler,
    fit_svm_rbf,
    gini,
    grid_search_svm,
    stratified_folds,
    write_grid_csv,
)
from tidalml.learn.forest import best_split, grow_tree
from tidalml.learn.logistic import loss_and_grad
from tidalml.learn.perceptron import _train_binary
from tidalml.learn.svm import rbf_kernel, smo

FITTERS = {
    "gaussian_nb": lambda X, y: fit_gaussian_nb(X, y),
    "logreg": lambda X, y: fit_logreg(X, y),
    "perceptron": lambda X, y: fit_perceptron(X, y, seed=0),
    "svm_rbf": lambda X, y: fit_svm_rbf(X, y),
    "random_forest": lambda X, y: fit_random_forest(X, y, n_trees=20, seed=0),
}


class TestScaler:
    def test_standardises(self):
        X = np.random.default_rng(0).normal([3, -2], [5, 0.1], size=(500, 2))
        Z = apply_scaler(fit_scaler(X), X)
        np.testing.assert_allclose(Z.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(Z.std(axis=0), 1, atol=1e-12)

    def test_constant_column(self):
        X = np.c_[np.arange(5.0), np.full(5, 7.0)]
        s = fit_scaler(X)
        assert s.std[1] == 1.0
        assert np.all(apply_scaler(s, X)[:, 1] == 0)

    def test_uses_training_statistics(self):
        s = fit_scaler(np.array([[0.0], [2.0]]))
        assert apply_scaler(s, np.array([[5.0]]))[0, 0] == 4.0


@pytest.mark.parametrize("kind", list(FITTERS))
class TestCommonContract:
    def test_separable_clusters(self, kind, toy_clusters):
        X, y = toy_clusters
        model = FITTERS[kind](X, y)
        assert np.all(model.predict(X) == y)

    def test_shift_equivariance(self, kind, toy_clusters):
        X, y = toy_clusters
        shift = np.array([123.0, -45.0])
        a = FITTERS[kind](X, y).predict(X)
        b = FITTERS[kind](X + shift, y).predict(X + shift)
        assert np.array_equal(a, b)

    def test_argmax_consistency(self, kind, toy_clusters):
        X, y = toy_clusters
        model = FITTERS[kind](X, y)
        grid = np.random.default_rng(1).uniform(-3, 13, size=(200, 2))
        s = model.score(grid)
        assert s.shape == (200, 3)
        assert np.array_equal(model.predict(grid), model.classes[np.argmax(s, axis=1)])
        np.testing.assert_allclose(model.score(grid[5]), s[5], rtol=1e-12, atol=1e-14)
        if model.probabilistic:
            np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-12)

    def test_serialisation_round_trip(self, kind, toy_clusters, tmp_path):
        X, y = toy_clusters
        model = FITTERS[kind](X, y)
        model.save(tmp_path / "m.json")
        again = TrainedModel.load(tmp_path / "m.json")
        grid = np.random.default_rng(2).uniform(-3, 13, size=(100, 2))
        assert again.kind == kind
        assert np.array_equal(again.score(grid), model.score(grid))
        assert json.dumps(again.to_dict()) == json.dumps(model.to_dict())

    def test_rejects_nonfinite(self, kind, toy_clusters):
        X, y = toy_clusters
        X = X.copy()
        X[0, 0] = np.nan
        with pytest.raises(FitError):
            FITTERS[kind](X, y)


def test_unfitted_model_raises():
    with pytest.raises(NotFittedError):
        TrainedModel("logreg", None, np.arange(3)).predict(np.zeros((1, 2)))


def test_from_dict_rejects_foreign_documents():
    with pytest.raises(ValueError):
        TrainedModel.from_dict({"format": "other"})


def test_missing_class_rejected_where_required(toy_clusters):
    X, y = toy_clusters
    with pytest.raises(FitError):
        fit_gaussian_nb(X[y < 2], y[y < 2], classes=(0, 1, 2))


class TestNaiveBayes:
    X = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [5.0, 4.0], [6.0, 6.0], [7.0, 5.0]])
    y = np.array([0, 0, 0, 1, 1, 1])

    def test_brute_force_posterior(self):
        model = fit_gaussian_nb(self.X, self.y, scale=False)
        eps = 1e-9 * self.X.var(axis=0).max()
        q = np.array([3.0, 2.5])
        joint = []
        for c in (0, 1):
            rows = self.X[self.y == c]
            m, v = rows.mean(axis=0), rows.var(axis=0) + eps
            dens = np.prod(np.exp(-((q - m) ** 2) / (2 * v)) / np.sqrt(2 * math.pi * v))
            joint.append(0.5 * dens)
        expected = np.array(joint) / sum(joint)
        np.testing.assert_allclose(model.score(q), expected, rtol=1e-10)

    def test_equal_variance_threshold_at_midpoint(self):
        X = np.array([[-1.0], [1.0], [3.0], [5.0]])
        model = fit_gaussian_nb(X, [0, 0, 1, 1], scale=False)
        np.testing.assert_allclose(model.score(np.array([2.0])), [0.5, 0.5], atol=1e-12)
        assert model.predict(np.array([[1.9], [2.1]])).tolist() == [0, 1]


class TestLogistic:
    @pytest.mark.parametrize("l2", [0.0, 1.0])
    def test_gradient_matches_finite_differences(self, l2):
        rng = np.random.default_rng(4)
        Z = rng.normal(size=(20, 2))
        T = np.eye(3)[rng.integers(0, 3, 20)]
        theta = rng.normal(size=9)
        _, g = loss_and_grad(theta, Z, T, l2)
        h = 1e-6
        fd = np.array([
            (loss_and_grad(theta + h * e, Z, T, l2)[0] - loss_and_grad(theta - h * e, Z, T, l2)[0]) / (2 * h)
            for e in np.eye(9)
        ])
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)

    def test_loss_non_increasing(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(150, 2)) + np.repeat([[0, 0], [1.5, 0], [0, 1.5]], 50, axis=0)
        model = fit_logreg(X, np.repeat([0, 1, 2], 50))
        hist = model.params["loss_history"]
        assert np.all(np.diff(hist) <= 1e-12)
        assert model.status == "converged"

    def test_unpenalised_bias_learns_prior(self):
        # no informative features: softmax of the biases matches class frequencies
        X = np.zeros((10, 1))
        y = np.array([0] * 7 + [1] * 3)
        model = fit_logreg(X, y, l2_strength=1.0)
        np.testing.assert_allclose(model.score(np.zeros(1)), [0.7, 0.3], atol=1e-6)


class TestPerceptron:
    def test_no_update_when_correct(self):
        w, b, hist = _train_binary([[1.0, 1.0]], [1], [[0]], 1.0)
        assert hist == [0]
        assert w.tolist() == [0.0, 0.0] and b == 0.0

    def test_single_mistake_update(self):
        # w = 0 predicts 1 (act >= 0) so a negative example is one mistake
        w, b, hist = _train_binary([[2.0, -1.0]], [0], [[0], [0]], 0.5)
        assert hist == [1, 0]
        assert w.tolist() == [-1.0, 0.5] and b == -0.5

    def test_converges_on_separable_data(self, toy_clusters):
        X, y = toy_clusters
        model = fit_perceptron(X, y, max_epochs=50)
        assert model.status == "converged"
        assert np.all(model.params["epochs"] <= 50)

    def test_seed_determinism(self, toy_clusters):
        X, y = toy_clusters
        a = fit_perceptron(X, y, seed=3).params["coef"]
        assert np.array_equal(a, fit_perceptron(X, y, seed=3).params["coef"])


def _dual_oracle(Q, y, C):
    """Exact dual optimum by enumerating free/lower/upper partitions."""
    n = y.size
    best, best_obj = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=n):
        free = np.array([p == 1 for p in pattern])
        alpha = np.array([C if p == 2 else 0.0 for p in pattern])
        if free.any():
            f = np.nonzero(free)[0]
            b_idx = np.nonzero(~free)[0]
            m = f.size
            A = np.zeros((m + 1, m + 1))
            A[:m, :m] = Q[np.ix_(f, f)]
            A[:m, m] = y[f]
            A[m, :m] = y[f]
            rhs = np.r_[1.0 - Q[np.ix_(f, b_idx)] @ alpha[b_idx], -y[b_idx] @ alpha[b_idx]]
            sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
            alpha[f] = sol[:m]
        if abs(y @ alpha) > 1e-9 or np.any(alpha < -1e-12) or np.any(alpha > C + 1e-12):
            continue
        obj = 0.5 * alpha @ Q @ alpha - alpha.sum()
        if obj < best_obj - 1e-12:
            best, best_obj = alpha, obj
    return best, best_obj


class TestSvm:
    def test_kernel(self):
        K = rbf_kernel(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([[0.0, 0.0]]), 0.5)
        np.testing.assert_allclose(K[:, 0], [1.0, math.exp(-1.0)])

    @pytest.mark.parametrize("C", [0.3, 1.0, 10.0])
    def test_four_point_dual_matches_enumeration(self, C):
        X = np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 1.0], [1.2, 1.1]])
        y = np.array([1.0, -1.0, -1.0, 1.0])
        K = rbf_kernel(X, X, 1.0)
        sol = smo(K, y, C, tol=1e-10)
        Q = np.outer(y, y) * K
        oracle, obj = _dual_oracle(Q, y, C)
        got = 0.5 * sol.alpha @ Q @ sol.alpha - sol.alpha.sum()
        assert got == pytest.approx(obj, abs=1e-9)
        np.testing.assert_allclose(sol.alpha, oracle, atol=1e-6)

    def test_free_support_vectors_sit_on_the_margin(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0]])
        y = np.array([-1.0, -1.0, 1.0, 1.0])
        K = rbf_kernel(X, X, 0.5)
        sol = smo(K, y, 100.0, tol=1e-6)
        f = K @ (sol.alpha * y) - sol.rho
        free = (sol.alpha > 1e-12) & (sol.alpha < 100.0)
        assert free.any()
        np.testing.assert_allclose(y[free] * f[free], 1.0, atol=1e-6)
        assert np.all(y * f >= 1.0 - 1e-6)

    @given(st.integers(0, 10_000), st.sampled_from([0.1, 1.0, 10.0]))
    @settings(max_examples=25, deadline=None)
    def test_constraints_and_kkt(self, seed, C):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(30, 2))
        y = np.where(X[:, 0] + 0.5 * rng.normal(size=30) > 0, 1.0, -1.0)
        if abs(y.sum()) == 30:
            y[0] = -y[0]
        sol = smo(rbf_kernel(X, X, 1.0), y, C, tol=1e-3)
        assert sol.converged and sol.kkt_gap < 1e-3
        assert np.all(sol.alpha >= -1e-9) and np.all(sol.alpha <= C + 1e-9)
        assert abs(y @ sol.alpha) < 1e-9

    def test_duplicating_non_support_vector_is_harmless(self, toy_clusters):
        X, y = toy_clusters
        model = fit_svm_rbf(X, y, scale=False, gamma=0.5, C=1.0, tol=1e-6)
        alpha = model.params["alpha"]
        idx = int(np.nonzero(np.all(alpha == 0, axis=0))[0][0])
        X2, y2 = np.vstack([X, X[idx]]), np.r_[y, y[idx]]
        model2 = fit_svm_rbf(X2, y2, scale=False, gamma=0.5, C=1.0, tol=1e-6)
        grid = np.random.default_rng(3).uniform(-3, 13, size=(300, 2))
        np.testing.assert_allclose(model2.score(grid), model.score(grid), atol=1e-4)

    def test_kkt_gap_recorded(self, toy_clusters):
        X, y = toy_clusters
        model = fit_svm_rbf(X, y, tol=1e-3)
        assert np.all(model.params["kkt_gap"] <= 1e-3)

    def test_invalid_hyperparameters(self, toy_clusters):
        with pytest.raises(ValueError):
            fit_svm_rbf(*toy_clusters, gamma=0.0)


class TestForest:
    def test_gini_values(self):
        assert gini([5, 0, 0]) == 0.0
        assert gini([1, 1]) == pytest.approx(0.5)
        assert gini([1, 1, 1]) == pytest.approx(2 / 3)
        assert gini([0, 0]) == 0.0

    def test_root_split_against_brute_force(self):
        x = np.array([2.0, 0.5, 3.5, 1.0, 2.5])
        y = np.array([1, 0, 1, 0, 0])
        score, thr = best_split(x, y, 2)
        u = np.unique(x)
        cands = (u[1:] + u[:-1]) / 2
        brute = []
        for t in cands:
            lo, hi = y[x <= t], y[x > t]
            brute.append((lo.size * gini(np.bincount(lo, minlength=2))
                          + hi.size * gini(np.bincount(hi, minlength=2))) / y.size)
        assert thr == cands[int(np.argmin(brute))]
        assert score == pytest.approx(min(brute), abs=1e-15)

    def test_constant_feature_has_no_split(self):
        assert best_split(np.ones(4), np.array([0, 1, 0, 1]), 2) is None

    def test_full_tree_reproduces_training_labels(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(80, 2))
        y = rng.integers(0, 3, 80)
        model = fit_random_forest(X, y, n_trees=1, bootstrap=False, max_features="all")
        assert np.array_equal(model.predict(X), y)

    def test_pure_node_is_leaf(self):
        feature, *_ = grow_tree(np.zeros((4, 1)), np.zeros(4, dtype=int), 2, 1,
                                np.random.default_rng(0))
        assert feature.tolist() == [-1]

    def test_deterministic_and_thread_independent(self, toy_clusters):
        X, y = toy_clusters
        a = fit_random_forest(X, y, n_trees=10, seed=4)
        b = fit_random_forest(X, y, n_trees=10, seed=4, n_jobs=4)
        for key in a.params:
            assert np.array_equal(a.params[key], b.params[key])
        c = fit_random_forest(X, y, n_trees=10, seed=5)
        assert not np.array_equal(a.params["threshold"], c.params["threshold"])


class TestGrid:
    @pytest.mark.slow
    def test_broad_plateau_on_reproduction_cohort(self, tmp_path):
        from tidalml.config import RunConfig
        from tidalml.pipeline import run_grid

        cfg = RunConfig.from_dict({"cohort": {"n_per_class": 200}, "figures": False})
        res = run_grid(cfg, out=tmp_path)
        best = res.accuracy.max()
        assert best >= 0.95
        assert np.count_nonzero(res.accuracy >= best - 0.01) >= 8

    def test_folds_stratified(self):
        y = np.repeat([0, 1, 2], 50)
        folds = stratified_folds(y, 5, seed=1)
        for f in range(5):
            assert np.bincount(y[folds == f]).tolist() == [10, 10, 10]

    def test_single_cell_and_range(self, toy_clusters, tmp_path):
        X, y = toy_clusters
        res = grid_search_svm(X, y, [1.0], [1.0], folds=3)
        assert res.accuracy.shape == (1, 1)
        assert res.accuracy[0, 0] == pytest.approx(1.0)
        res = grid_search_svm(X, y, [0.01, 1.0], [0.1, 10.0], folds=3)
        assert np.all((res.accuracy >= 0) & (res.accuracy <= 1))
        write_grid_csv(tmp_path / "g.csv", res)
        lines = (tmp_path / "g.csv").read_text().splitlines()
        assert lines[0] == "gamma\\C,0.10000000000000001,10"
        assert len(lines) == 3

    def test_ties_prefer_small_C_then_small_gamma(self, toy_clusters):
        X, y = toy_clusters
        res = grid_search_svm(X, y, [10.0, 1.0], [10.0, 1.0], folds=3)
        assert np.all(res.accuracy == 1.0)
        assert (res.best_gamma, res.best_C) == (1.0, 1.0)
