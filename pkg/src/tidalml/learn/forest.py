"""Random forest of Gini trees grown to purity by exhaustive threshold search."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .base import TrainedModel, prepare, register


def gini(counts) -> float:
    """``1 - sum(p_i^2)`` for class counts (or proportions)."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def best_split(x, y, n_classes):
    """Best threshold on one feature.

    Candidates are midpoints between consecutive distinct sorted values; the
    score is the size-weighted Gini of the two children. Returns
    ``(score, threshold)`` or ``None`` when ``x`` is constant. Ties keep the
    smallest threshold.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    distinct = np.nonzero(xs[1:] > xs[:-1])[0]
    if distinct.size == 0:
        return None
    onehot = np.zeros((xs.size, n_classes))
    onehot[np.arange(xs.size), y[order]] = 1.0
    left = np.cumsum(onehot, axis=0)[distinct]
    total = left[-1] + onehot[distinct[-1] + 1:].sum(axis=0)
    right = total - left
    n_left = distinct + 1.0
    n_right = xs.size - n_left
    # n_L*gini_L = n_L - sum(c^2)/n_L
    weighted = (n_left - (left * left).sum(axis=1) / n_left) + (
        n_right - (right * right).sum(axis=1) / n_right
    )
    best = int(np.argmin(weighted))
    threshold = 0.5 * (xs[distinct[best]] + xs[distinct[best] + 1])
    return weighted[best] / xs.size, float(threshold)


def _max_features(setting, d):
    if setting in (None, "all"):
        return d
    if setting == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    return max(1, min(d, int(setting)))


def grow_tree(X, y, n_classes, max_features, rng):
    """Grow one tree; returns node arrays ``(feature, threshold, left, right, value)``.

    Leaves have ``feature == -1`` and store class proportions in ``value``.
    """
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        return len(feature) - 1

    stack = [(new_node(np.arange(y.size)), np.arange(y.size))]
    while stack:
        node, idx = stack.pop()
        if idx.size < 2 or np.count_nonzero(value[node]) == 1:
            continue
        best = None
        tried = 0
        # keep drawing features until max_features non-constant ones are scored
        for f in rng.permutation(X.shape[1]):
            if tried >= max_features:
                break
            found = best_split(X[idx, f], y[idx], n_classes)
            if found is None:
                continue
            tried += 1
            if best is None or found[0] < best[0]:
                best = (found[0], found[1], int(f))
        if best is None:
            continue
        _, thr, f = best
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return (
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=float),
    )


def _fit_one(args):
    Z, yi, k, m, seed, t, bootstrap = args
    rng = np.random.default_rng([int(seed), int(t)])
    if bootstrap:
        sample = rng.integers(0, yi.size, yi.size)
        return grow_tree(Z[sample], yi[sample], k, m, rng)
    return grow_tree(Z, yi, k, m, rng)


def _shift(children, offset):
    return np.where(children >= 0, children + offset, -1)


def fit_random_forest(
    X,
    y,
    n_trees=100,
    seed=0,
    max_features="sqrt",
    bootstrap=True,
    classes=None,
    scale=True,
    n_jobs=1,
):
    """Bagged Gini trees; the forest score is the mean of leaf proportions.

    Tree ``t`` draws its bootstrap sample and feature order from a stream
    keyed by ``(seed, t)``, so results do not depend on ``n_jobs``.
    """
    Z, yi, classes, scaler = prepare(X, y, classes, scale, require_all=True)
    k = classes.size
    m = _max_features(max_features, Z.shape[1])
    jobs = [(Z, yi, k, m, seed, t, bootstrap) for t in range(n_trees)]
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(_fit_one, jobs))
    else:
        trees = [_fit_one(j) for j in jobs]

    offsets = np.cumsum([0] + [t[0].size for t in trees])
    params = {
        "feature": np.concatenate([t[0] for t in trees]),
        "threshold": np.concatenate([t[1] for t in trees]),
        "left": np.concatenate([_shift(t[2], o) for t, o in zip(trees, offsets)]),
        "right": np.concatenate([_shift(t[3], o) for t, o in zip(trees, offsets)]),
        "value": np.concatenate([t[4] for t in trees]),
        "roots": offsets[:-1].astype(np.int64),
    }
    return TrainedModel("random_forest", scaler, classes, params)


def apply_trees(params, Z):
    """Leaf index reached by each row in each tree, shape ``(n, n_trees)``."""
    feature, threshold = params["feature"], params["threshold"]
    left, right = params["left"], params["right"]
    leaves = np.empty((Z.shape[0], params["roots"].size), dtype=np.int64)
    rows = np.arange(Z.shape[0])
    for t, root in enumerate(params["roots"]):
        node = np.full(Z.shape[0], root, dtype=np.int64)
        active = rows
        while active.size:
            cur = node[active]
            f = feature[cur]
            internal = f >= 0
            active, cur, f = active[internal], cur[internal], f[internal]
            go_left = Z[active, f] <= threshold[cur]
            node[active] = np.where(go_left, left[cur], right[cur])
        leaves[:, t] = node
    return leaves


@register("random_forest", probabilistic=True)
def _score(params, Z):
    leaves = apply_trees(params, Z)
    return params["value"][leaves].mean(axis=1)
