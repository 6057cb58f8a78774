import numpy as np

from .base import TrainedModel, prepare, register

VAR_SMOOTHING = 1e-9


def fit_gaussian_nb(X, y, classes=None, scale=True, var_smoothing=VAR_SMOOTHING):
    """Gaussian naive Bayes with empirical priors.

    Every class variance is inflated by ``var_smoothing`` times the largest
    per-feature variance of the training data, so constant features stay finite.
    """
    Z, yi, classes, scaler = prepare(X, y, classes, scale, require_all=True)
    k = classes.size
    eps = var_smoothing * Z.var(axis=0).max()
    theta = np.empty((k, Z.shape[1]))
    var = np.empty_like(theta)
    prior = np.empty(k)
    for c in range(k):
        rows = Z[yi == c]
        theta[c] = rows.mean(axis=0)
        var[c] = rows.var(axis=0) + eps
        prior[c] = rows.shape[0] / Z.shape[0]
    params = {"theta": theta, "var": var, "prior": prior}
    return TrainedModel("gaussian_nb", scaler, classes, params)


def joint_log_likelihood(params, Z):
    theta, var, prior = params["theta"], params["var"], params["prior"]
    # (n, k): log P(y) + sum_i log N(x_i | theta, var)
    diff = Z[:, None, :] - theta[None, :, :]
    ll = -0.5 * np.sum(np.log(2.0 * np.pi * var)[None] + diff**2 / var[None], axis=2)
    return ll + np.log(prior)[None, :]


@register("gaussian_nb", probabilistic=True)
def _score(params, Z):
    jll = joint_log_likelihood(params, Z)
    jll -= jll.max(axis=1, keepdims=True)
    p = np.exp(jll)
    return p / p.sum(axis=1, keepdims=True)
