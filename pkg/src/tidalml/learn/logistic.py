"""Multinomial logistic regression fitted by damped Newton iterations."""

import warnings

import numpy as np

from .base import ConvergenceWarning, TrainedModel, prepare, register


def _softmax(a):
    a = a - a.max(axis=1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=1, keepdims=True)


def _unpack(theta, k, d):
    wb = theta.reshape(k, d + 1)
    return wb[:, :d], wb[:, d]


def loss_and_grad(theta, Z, T, l2_strength):
    """Penalised cross-entropy and its gradient.

    ``theta`` is the flattened ``(k, d+1)`` matrix of weights with the bias
    in the last column. The bias is not penalised.
    """
    k = T.shape[1]
    d = Z.shape[1]
    W, b = _unpack(theta, k, d)
    A = Z @ W.T + b
    A_shift = A - A.max(axis=1, keepdims=True)
    log_p = A_shift - np.log(np.exp(A_shift).sum(axis=1, keepdims=True))
    loss = 0.5 * l2_strength * np.sum(W * W) - np.sum(T * log_p)
    R = np.exp(log_p) - T
    gW = R.T @ Z + l2_strength * W
    gb = R.sum(axis=0)
    return loss, np.hstack([gW, gb[:, None]]).ravel()


def _hessian(theta, Z, k, l2_strength):
    n, d = Z.shape
    W, b = _unpack(theta, k, d)
    P = _softmax(Z @ W.T + b)
    Zt = np.hstack([Z, np.ones((n, 1))])
    m = d + 1
    H = np.empty((k * m, k * m))
    for a in range(k):
        for c in range(a, k):
            w = P[:, a] * ((a == c) - P[:, c])
            block = (Zt * w[:, None]).T @ Zt
            H[a * m:(a + 1) * m, c * m:(c + 1) * m] = block
            H[c * m:(c + 1) * m, a * m:(a + 1) * m] = block.T
    reg = np.tile(np.r_[np.full(d, l2_strength), 0.0], k)
    return H + np.diag(reg)


def fit_logreg(X, y, l2_strength=1.0, tol=1e-6, max_iter=100, classes=None, scale=True):
    """Minimise ``l2/2 * ||W||^2 - sum t_nk log softmax_k`` over W and biases.

    Each step solves the Newton system in the least-squares sense (the
    softmax is invariant to a common shift of the biases, so the Hessian is
    singular along that direction) and backtracks until the loss decreases.
    """
    Z, yi, classes, scaler = prepare(X, y, classes, scale, require_all=False, min_classes=2)
    k = classes.size
    d = Z.shape[1]
    T = np.zeros((Z.shape[0], k))
    T[np.arange(Z.shape[0]), yi] = 1.0
    theta = np.zeros(k * (d + 1))
    loss, grad = loss_and_grad(theta, Z, T, l2_strength)
    history = [loss]
    status = "max_iter"
    for _ in range(max_iter):
        if np.linalg.norm(grad) < tol:
            status = "converged"
            break
        H = _hessian(theta, Z, k, l2_strength)
        step = np.linalg.lstsq(H, -grad, rcond=None)[0]
        slope = grad @ step
        if slope >= 0:
            step, slope = -grad, -(grad @ grad)
        t = 1.0
        while True:
            cand = theta + t * step
            new_loss, new_grad = loss_and_grad(cand, Z, T, l2_strength)
            if new_loss <= loss + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if new_loss > loss:
            status = "stalled"
            break
        theta, loss, grad = cand, new_loss, new_grad
        history.append(loss)
    else:
        if np.linalg.norm(grad) < tol:
            status = "converged"
    if status != "converged":
        warnings.warn(
            f"logistic regression did not converge ({status}, |grad|={np.linalg.norm(grad):.3g})",
            ConvergenceWarning,
            stacklevel=2,
        )
    W, b = _unpack(theta, k, d)
    params = {"coef": W.copy(), "intercept": b.copy(), "loss_history": np.asarray(history)}
    return TrainedModel("logreg", scaler, classes, params, status=status)


@register("logreg", probabilistic=True)
def _score(params, Z):
    return _softmax(Z @ params["coef"].T + params["intercept"])
