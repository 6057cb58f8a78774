"""Soft-margin RBF support vector machines trained with SMO.

Binary problems are solved in the dual::

    min  1/2 a^T Q a - sum(a)    s.t.  0 <= a_i <= C,  y^T a = 0

with ``Q_ij = y_i y_j k(x_i, x_j)`` and ``k(x, x') = exp(-gamma*|x - x'|^2)``.
The working pair is chosen by maximal violation for ``i`` and second-order
gain for ``j`` (Fan, Chen & Lin, JMLR 2005). Multiclass problems use one
binary machine per class against the rest.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .base import ConvergenceWarning, TrainedModel, prepare, register

TAU = 1e-12


def rbf_kernel(A, B, gamma):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@dataclass
class DualSolution:
    alpha: np.ndarray
    rho: float
    kkt_gap: float
    iterations: int
    converged: bool


def smo(K, y, C, tol=1e-3, max_iter=100_000):
    """Solve the binary dual for labels ``y`` in {-1, +1} and kernel matrix ``K``.

    Stops when the maximal KKT violation ``m(a) - M(a)`` drops below ``tol``.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(K).copy()
    gap = np.inf
    it = 0
    while it < max_iter:
        pos = y > 0
        upper = alpha >= C
        lower = alpha <= 0
        # I_up: can move in the +y direction; I_low: in the -y direction
        in_up = np.where(pos, ~upper, ~lower)
        in_low = np.where(pos, ~lower, ~upper)
        minus_yg = -y * G
        cand = np.where(in_up, minus_yg, -np.inf)
        i = int(np.argmax(cand))
        g_max = cand[i]
        low_vals = np.where(in_low, minus_yg, np.inf)
        gap = g_max - low_vals.min()
        if gap < tol:
            break
        b = g_max - minus_yg
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        obj = np.where(in_low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        if not np.isfinite(obj[j]):
            break

        ai_old, aj_old = alpha[i], alpha[j]
        quad = max(diag[i] + diag[j] - 2.0 * K[i, j], TAU)
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        G += y * (y[i] * (ai - ai_old) * K[i] + y[j] * (aj - aj_old) * K[j])
        it += 1

    converged = gap < tol
    return DualSolution(alpha, _rho(alpha, y, G, C), float(gap), it, bool(converged))


def _rho(alpha, y, G, C):
    yg = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yg[free].mean())
    at_upper = alpha >= C
    ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (~at_upper & (y < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def solve_one_vs_rest(K, yi, k, C, tol=1e-3, max_iter=100_000):
    """Binary duals for each class against the rest on a shared kernel matrix.

    Returns ``(alpha, dual_coef, rho, kkt_gap, converged)`` with per-class rows.
    """
    n = yi.size
    alphas = np.zeros((k, n))
    dual = np.zeros((k, n))
    rho = np.zeros(k)
    gaps = np.zeros(k)
    converged = True
    for c in range(k):
        yc = np.where(yi == c, 1.0, -1.0)
        sol = smo(K, yc, C, tol, max_iter)
        alphas[c] = sol.alpha
        dual[c] = sol.alpha * yc
        rho[c] = sol.rho
        gaps[c] = sol.kkt_gap
        converged &= sol.converged
    return alphas, dual, rho, gaps, converged


def fit_svm_rbf(X, y, gamma=1.0, C=1.0, tol=1e-3, max_iter=100_000, classes=None, scale=True):
    """One-vs-rest RBF SVMs; scores are the signed decision margins."""
    if not (gamma > 0 and C > 0):
        raise ValueError("gamma and C must be > 0")
    Z, yi, classes, scaler = prepare(X, y, classes, scale, require_all=False, min_classes=2)
    K = rbf_kernel(Z, Z, gamma)
    alphas, dual, rho, gaps, converged = solve_one_vs_rest(K, yi, classes.size, C, tol, max_iter)
    if not converged:
        warnings.warn("SMO reached the iteration cap", ConvergenceWarning, stacklevel=2)
    keep = np.any(alphas > 0, axis=0)
    params = {
        "gamma": float(gamma),
        "C": float(C),
        "support_vectors": Z[keep].copy(),
        "dual_coef": dual[:, keep].copy(),
        "rho": rho,
        "kkt_gap": gaps,
        "alpha": alphas,
    }
    return TrainedModel("svm_rbf", scaler, classes, params,
                        status="converged" if converged else "max_iter")


@register("svm_rbf", probabilistic=False)
def _score(params, Z, chunk=8192):
    sv = params["support_vectors"]
    coef = params["dual_coef"]
    out = np.empty((Z.shape[0], coef.shape[0]))
    for start in range(0, Z.shape[0], chunk):
        block = rbf_kernel(Z[start:start + chunk], sv, params["gamma"])
        out[start:start + chunk] = block @ coef.T - params["rho"]
    return out
