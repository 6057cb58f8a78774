"""Train/test splitting, accuracy, macro ROC, decision regions and fit timing."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .learn.base import TrainedModel

MACRO_FPR_POINTS = 101


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int


def split_dataset(n, labels, test_fraction=0.2, seed=0) -> SplitIndices:
    """Stratified shuffle split returning positional indices.

    Each class contributes ``round(n_c * test_fraction)`` test samples.
    """
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise EvaluationError("need one label per sample")
    rng = np.random.default_rng([int(seed), 0x5B17])
    train, test = [], []
    for label in np.unique(labels):
        idx = np.nonzero(labels == label)[0]
        if idx.size < 5:
            raise EvaluationError(f"class {label!r} has fewer than 5 samples")
        idx = idx[rng.permutation(idx.size)]
        n_test = int(round(idx.size * test_fraction))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return SplitIndices(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)), int(seed))


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise EvaluationError("y_true and y_pred must be nonempty and equal length")
    return float(np.mean(y_true == y_pred))


def confusion_matrix(y_true, y_pred, n_classes) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def roc_binary(scores, positive):
    """ROC points for one-vs-rest scores, thresholds swept high to low.

    Every distinct score is a threshold (``score >= t`` is positive), plus a
    ``+inf`` sentinel so the curve starts at (0, 0).
    """
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    n_pos = positive.sum()
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("ROC needs both positive and negative samples")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(positive[order])
    fp = np.cumsum(~positive[order])
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(s[1:] != s[:-1])[0], s.size - 1]
    fpr = np.r_[0.0, fp[ends] / n_neg]
    tpr = np.r_[0.0, tp[ends] / n_pos]
    thresholds = np.r_[np.inf, s[ends]]
    return fpr, tpr, thresholds


def auc(fpr, tpr) -> float:
    return float(np.trapezoid(tpr, fpr)) if hasattr(np, "trapezoid") else float(np.trapz(tpr, fpr))


@dataclass(frozen=True)
class RocCurve:
    fpr: list
    tpr: list
    auc: np.ndarray
    macro_fpr: np.ndarray
    macro_tpr: np.ndarray
    macro_auc: float


def roc_macro(scores, y_true, classes: Optional[Sequence] = None) -> RocCurve:
    """Per-class one-vs-rest ROC plus the macro average.

    The macro curve is the mean per-class TPR interpolated on a uniform FPR
    grid; the macro AUC is the mean of the per-class AUCs.
    """
    scores = np.asarray(scores, dtype=float)
    y_true = np.asarray(y_true)
    classes = np.arange(scores.shape[1]) if classes is None else np.asarray(classes)
    fprs, tprs, aucs = [], [], []
    grid = np.linspace(0.0, 1.0, MACRO_FPR_POINTS)
    mean_tpr = np.zeros_like(grid)
    for col, label in enumerate(classes):
        positive = y_true == label
        if not positive.any():
            raise EvaluationError(f"class {label!r} absent from y_true")
        fpr, tpr, _ = roc_binary(scores[:, col], positive)
        fprs.append(fpr)
        tprs.append(tpr)
        aucs.append(auc(fpr, tpr))
        mean_tpr += np.interp(grid, fpr, tpr)
    mean_tpr /= len(classes)
    mean_tpr[0] = 0.0
    return RocCurve(fprs, tprs, np.asarray(aucs), grid, mean_tpr, float(np.mean(aucs)))


@dataclass(frozen=True)
class RegionGrid:
    bounds: tuple[float, float, float, float]  # (x_min, x_max, y_min, y_max)
    resolution: int
    xs: np.ndarray
    ys: np.ndarray
    labels: np.ndarray  # shape (resolution, resolution), indexed [iy, ix]


def default_bounds(X, pad=0.1):
    X = np.asarray(X, dtype=float)
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    lo, hi = lo - pad * span, hi + pad * span
    return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])


def decision_region_grid(model: TrainedModel, bounds=None, resolution=300, data=None) -> RegionGrid:
    """Predicted label at every cell centre of a ``resolution x resolution`` grid.

    ``bounds`` defaults to the bounding box of ``data`` padded by 10%.
    """
    if bounds is None:
        if data is None:
            raise EvaluationError("need bounds or data")
        bounds = default_bounds(data)
    x0, x1, y0, y1 = map(float, bounds)
    if not (np.isfinite([x0, x1, y0, y1]).all() and x0 < x1 and y0 < y1):
        raise EvaluationError("bounds must be finite with min < max")
    hx = (x1 - x0) / resolution
    hy = (y1 - y0) / resolution
    xs = x0 + hx * (np.arange(resolution) + 0.5)
    ys = y0 + hy * (np.arange(resolution) + 0.5)
    gx, gy = np.meshgrid(xs, ys)
    labels = model.predict(np.c_[gx.ravel(), gy.ravel()]).reshape(resolution, resolution)
    return RegionGrid((x0, x1, y0, y1), resolution, xs, ys, labels)


@dataclass(frozen=True)
class TimingReport:
    durations: Mapping[str, list] = field(default_factory=dict)
    repetitions: int = 5

    @property
    def median(self) -> dict:
        return {name: float(np.median(d)) for name, d in self.durations.items()}


def time_training(X, y, classifiers: Mapping[str, Callable], repetitions=5) -> TimingReport:
    """Median wall-clock fit time per classifier after one warm-up fit.

    ``classifiers`` maps a name to ``fit(X, y)``. Fits run sequentially.
    """
    if repetitions < 1:
        raise EvaluationError("repetitions must be >= 1")
    durations = {}
    for name, fit in classifiers.items():
        fit(X, y)
        runs = []
        for _ in range(repetitions):
            start = time.perf_counter()
            fit(X, y)
            runs.append(max(time.perf_counter() - start, 1e-9))
        durations[name] = runs
    return TimingReport(durations, repetitions)


def write_roc_csv(path, roc: RocCurve, class_names) -> None:
    """Rows ``class,fpr,tpr``; the macro curve uses class name ``macro``."""
    with open(path, "w", newline="") as fh:
        fh.write("class,fpr,tpr\n")
        for name, fpr, tpr in zip(class_names, roc.fpr, roc.tpr):
            for a, b in zip(fpr, tpr):
                fh.write(f"{name},{a:.17g},{b:.17g}\n")
        for a, b in zip(roc.macro_fpr, roc.macro_tpr):
            fh.write(f"macro,{a:.17g},{b:.17g}\n")


def write_region_csv(path, grid: RegionGrid, class_names) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("x,y,label\n")
        for iy, yv in enumerate(grid.ys):
            for ix, xv in enumerate(grid.xs):
                fh.write(f"{xv:.17g},{yv:.17g},{class_names[int(grid.labels[iy, ix])]}\n")
