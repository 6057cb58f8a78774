"""From-scratch classifiers sharing the :class:`TrainedModel` contract."""

from .base import (
    ConvergenceWarning,
    FitError,
    NotFittedError,
    ScalerParams,
    TrainedModel,
    apply_scaler,
    fit_scaler,
)
from .bayes import fit_gaussian_nb
from .forest import fit_random_forest, gini
from .grid import GridSearchResult, grid_search_svm, stratified_folds, write_grid_csv
from .logistic import fit_logreg
from .perceptron import fit_perceptron
from .svm import fit_svm_rbf

CLASSIFIERS = ("gaussian_nb", "logreg", "perceptron", "svm_rbf", "random_forest")


def predict(model: TrainedModel, x):
    return model.predict(x)


def score(model: TrainedModel, x):
    return model.score(x)


__all__ = [
    "CLASSIFIERS",
    "ConvergenceWarning",
    "FitError",
    "GridSearchResult",
    "NotFittedError",
    "ScalerParams",
    "TrainedModel",
    "apply_scaler",
    "fit_gaussian_nb",
    "fit_logreg",
    "fit_perceptron",
    "fit_random_forest",
    "fit_scaler",
    "fit_svm_rbf",
    "gini",
    "grid_search_svm",
    "predict",
    "score",
    "stratified_folds",
    "write_grid_csv",
]
