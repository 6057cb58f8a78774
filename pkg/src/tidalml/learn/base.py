"""Fitted-model container shared by all classifiers.

A :class:`TrainedModel` is a tagged record: ``kind`` names the variant,
``params`` holds its fitted arrays, and scoring is dispatched through a
registry populated by each classifier module. Scaling is applied inside
``score`` so callers always pass raw features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

FORMAT_VERSION = 1

# kind -> (score_fn(params, Z) -> (n, k) scores, is_probability)
_SCORERS: dict[str, tuple[Callable, bool]] = {}


class NotFittedError(RuntimeError):
    pass


class FitError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


def register(kind: str, probabilistic: bool):
    def deco(fn):
        _SCORERS[kind] = (fn, probabilistic)
        return fn

    return deco


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def identity(cls, n_features: int) -> "ScalerParams":
        return cls(np.zeros(n_features), np.ones(n_features))


STD_FLOOR = 1e-12


def fit_scaler(X) -> ScalerParams:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a nonempty 2-D array")
    std = X.std(axis=0)
    # constant columns keep a unit divisor so they scale to exactly zero
    std = np.where(std < STD_FLOOR, 1.0, std)
    return ScalerParams(X.mean(axis=0), std)


def apply_scaler(scaler: ScalerParams, X) -> np.ndarray:
    return (np.asarray(X, dtype=float) - scaler.mean) / scaler.std


@dataclass
class TrainedModel:
    kind: str
    scaler: Optional[ScalerParams]
    classes: np.ndarray
    params: dict = field(default_factory=dict)
    status: str = "converged"

    @property
    def probabilistic(self) -> bool:
        return _SCORERS[self.kind][1]

    def _check(self):
        if self.scaler is None or not self.params or self.kind not in _SCORERS:
            raise NotFittedError(f"{self.kind} model is not fitted")

    def score(self, X) -> np.ndarray:
        """Per-class scores, shape ``(n, n_classes)``; accepts one row or many."""
        self._check()
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if not np.all(np.isfinite(X)):
            raise ValueError("inputs must be finite")
        scores = _SCORERS[self.kind][0](self.params, apply_scaler(self.scaler, X))
        return scores[0] if single else scores

    def predict(self, X) -> np.ndarray:
        s = self.score(X)
        # np.argmax returns the first maximum, i.e. the lowest label on ties
        return self.classes[np.argmax(s, axis=-1)]

    def to_dict(self) -> dict:
        self._check()
        return {
            "format": "tidalml-model",
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "status": self.status,
            "classes": self.classes.tolist(),
            "scaler": {"mean": self.scaler.mean.tolist(), "std": self.scaler.std.tolist()},
            "params": {k: _encode(v) for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        if doc.get("format") != "tidalml-model":
            raise ValueError("not a tidalml model document")
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
        if doc["kind"] not in _SCORERS:
            raise ValueError(f"unknown model kind {doc['kind']!r}")
        scaler = ScalerParams(
            np.asarray(doc["scaler"]["mean"], dtype=float),
            np.asarray(doc["scaler"]["std"], dtype=float),
        )
        return cls(
            kind=doc["kind"],
            scaler=scaler,
            classes=np.asarray(doc["classes"], dtype=np.int64),
            params={k: _decode(v) for k, v in doc["params"].items()},
            status=doc.get("status", "converged"),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _encode(value):
    if isinstance(value, np.ndarray):
        return {"dtype": value.dtype.str, "shape": list(value.shape), "data": value.ravel().tolist()}
    return value


def _decode(value):
    if isinstance(value, dict) and "dtype" in value:
        return np.asarray(value["data"], dtype=np.dtype(value["dtype"])).reshape(value["shape"])
    return value


def prepare(X, y, classes=None, scale=True, require_all=True, min_classes=1):
    """Validate inputs and return ``(Z, y_index, classes, scaler)``.

    ``y_index`` maps each label to its column in ``classes``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise FitError("X must be 2-D with one label per row")
    if not np.all(np.isfinite(X)):
        raise FitError("X contains non-finite values")
    present = np.unique(y)
    classes = present if classes is None else np.unique(np.asarray(classes))
    missing = np.setdiff1d(classes, present)
    if require_all and missing.size:
        raise FitError(f"classes {missing.tolist()} have no training samples")
    if np.setdiff1d(present, classes).size:
        raise FitError("y contains labels outside `classes`")
    if present.size < min_classes:
        raise FitError(f"need at least {min_classes} classes, got {present.size}")
    scaler = fit_scaler(X) if scale else ScalerParams.identity(X.shape[1])
    y_index = np.searchsorted(classes, y)
    return apply_scaler(scaler, X), y_index, classes.astype(np.int64), scaler
