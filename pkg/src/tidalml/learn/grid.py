"""Cross-validated (gamma, C) grid search for the RBF SVM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import apply_scaler, fit_scaler
from .svm import rbf_kernel, solve_one_vs_rest


@dataclass(frozen=True)
class GridSearchResult:
    gammas: np.ndarray
    Cs: np.ndarray
    accuracy: np.ndarray  # shape (len(gammas), len(Cs))
    best_gamma: float
    best_C: float

    @property
    def best_index(self) -> tuple[int, int]:
        gi = int(np.nonzero(self.gammas == self.best_gamma)[0][0])
        ci = int(np.nonzero(self.Cs == self.best_C)[0][0])
        return gi, ci


def stratified_folds(y, folds, seed=0):
    """Fold index per sample; each class is shuffled then dealt round-robin."""
    y = np.asarray(y)
    rng = np.random.default_rng([int(seed), 0x6B66])
    assignment = np.empty(y.size, dtype=np.int64)
    for label in np.unique(y):
        idx = np.nonzero(y == label)[0]
        idx = idx[rng.permutation(idx.size)]
        assignment[idx] = np.arange(idx.size) % folds
    return assignment


def grid_search_svm(X, y, gammas, Cs, folds=5, seed=0, tol=1e-3, max_iter=100_000):
    """Mean validation accuracy of each (gamma, C) over stratified folds.

    Scaling is refit on the training part of every fold. The best cell is the
    highest accuracy, ties going to the smaller C and then the smaller gamma.
    """
    gammas = np.asarray(gammas, dtype=float)
    Cs = np.asarray(Cs, dtype=float)
    if gammas.size == 0 or Cs.size == 0:
        raise ValueError("grids must be nonempty")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes = np.unique(y)
    yi = np.searchsorted(classes, y)
    assignment = stratified_folds(yi, folds, seed)
    acc = np.zeros((gammas.size, Cs.size))
    for f in range(folds):
        train, val = assignment != f, assignment == f
        scaler = fit_scaler(X[train])
        Ztr, Zval = apply_scaler(scaler, X[train]), apply_scaler(scaler, X[val])
        for gi, gamma in enumerate(gammas):
            K = rbf_kernel(Ztr, Ztr, gamma)
            Kval = rbf_kernel(Zval, Ztr, gamma)
            for ci, C in enumerate(Cs):
                _, dual, rho, _, _ = solve_one_vs_rest(K, yi[train], classes.size, C, tol, max_iter)
                pred = np.argmax(Kval @ dual.T - rho, axis=1)
                acc[gi, ci] += np.mean(pred == yi[val]) / folds

    best = None
    for ci in np.argsort(Cs, kind="stable"):
        for gi in np.argsort(gammas, kind="stable"):
            if best is None or acc[gi, ci] > acc[best]:
                best = (gi, ci)
    return GridSearchResult(gammas, Cs, acc, float(gammas[best[0]]), float(Cs[best[1]]))


def write_grid_csv(path, result: GridSearchResult) -> None:
    """Matrix CSV: header row of C values, one row per gamma."""
    with open(path, "w", newline="") as fh:
        fh.write("gamma\\C," + ",".join(f"{c:.17g}" for c in result.Cs) + "\n")
        for g, row in zip(result.gammas, result.accuracy):
            fh.write(f"{g:.17g}," + ",".join(f"{a:.17g}" for a in row) + "\n")
