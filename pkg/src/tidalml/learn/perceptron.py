import numpy as np

from .base import TrainedModel, prepare, register


def _train_binary(rows, targets, order_per_epoch, eta):
    """Mistake-driven updates for a single 0/1 perceptron.

    Returns ``(w, b, mistakes_per_epoch)``; stops after the first clean epoch.
    """
    d = len(rows[0])
    w = [0.0] * d
    b = 0.0
    history = []
    for order in order_per_epoch:
        mistakes = 0
        for i in order:
            x = rows[i]
            act = b
            for j in range(d):
                act += w[j] * x[j]
            delta = targets[i] - (1 if act >= 0.0 else 0)
            if delta:
                mistakes += 1
                step = eta * delta
                for j in range(d):
                    w[j] += step * x[j]
                b += step
        history.append(mistakes)
        if mistakes == 0:
            break
    return np.array(w), b, history


def fit_perceptron(X, y, eta=1.0, max_epochs=50, seed=0, classes=None, scale=True):
    """One-vs-rest perceptrons updated on mistakes, ``w += eta*(y - y_hat)*x``.

    Samples are visited in a fresh permutation each epoch, drawn from ``seed``.
    """
    Z, yi, classes, scaler = prepare(X, y, classes, scale, require_all=False, min_classes=2)
    rng = np.random.default_rng(seed)
    orders = [rng.permutation(Z.shape[0]).tolist() for _ in range(max_epochs)]
    rows = Z.tolist()
    k = classes.size
    coef = np.zeros((k, Z.shape[1]))
    intercept = np.zeros(k)
    epochs = np.zeros(k, dtype=np.int64)
    converged = True
    for c in range(k):
        targets = (yi == c).astype(int).tolist()
        w, b, history = _train_binary(rows, targets, orders, eta)
        coef[c], intercept[c] = w, b
        epochs[c] = len(history)
        converged &= history[-1] == 0
    params = {"coef": coef, "intercept": intercept, "epochs": epochs}
    return TrainedModel(
        "perceptron", scaler, classes, params, status="converged" if converged else "max_epochs"
    )


@register("perceptron", probabilistic=False)
def _score(params, Z):
    return Z @ params["coef"].T + params["intercept"]
