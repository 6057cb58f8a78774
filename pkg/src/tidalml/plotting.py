"""Figure rendering for pipeline reports (files only, never interactive)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

CLASS_COLORS = ("#2b8cbe", "#e34a33", "#31a354")
STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "svg.hashsalt": "tidalml",
}


def _save(fig, path):
    fig.tight_layout()
    # fixed metadata keeps reruns byte-stable
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def bode_figure(omegas, curves, path):
    """``curves`` maps a name to ``(magnitude, phase)`` arrays."""
    with plt.rc_context(STYLE):
        fig, (ax_m, ax_p) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
        for (name, (mag, phase)), color in zip(curves.items(), CLASS_COLORS * 3):
            ax_m.loglog(omegas, mag, color=color, label=name)
            ax_p.semilogx(omegas, phase, color=color)
        ax_m.set_ylabel("|H| (L/cmH2O)")
        ax_p.set_ylabel("phase (rad)")
        ax_p.set_xlabel("omega (rad/s)")
        ax_m.axvline(2 * np.pi * 0.25, color="grey", ls=":", lw=1)
        ax_p.axvline(2 * np.pi * 0.25, color="grey", ls=":", lw=1)
        ax_m.legend()
        return _save(fig, path)


def signals_figure(times, signals, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7, 3))
        for (name, v), color in zip(signals.items(), CLASS_COLORS * 3):
            ax.plot(times, v, color=color, lw=1, label=name)
        ax.set_xlabel("t (s)")
        ax.set_ylabel("V (L)")
        ax.legend(loc="upper right")
        return _save(fig, path)


def scatter_figure(x, y, labels, class_names, path, xlabel, ylabel, curves=None):
    """Class-coloured scatter with optional closed overlay curves (name -> (m, 2))."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 4))
        for k, name in enumerate(class_names):
            sel = labels == k
            ax.scatter(x[sel], y[sel], s=4, alpha=0.5, color=CLASS_COLORS[k], label=name)
        for name, pts in (curves or {}).items():
            closed = np.vstack([pts, pts[:1]])
            ax.plot(closed[:, 0], closed[:, 1], lw=1.2, color="k" if name == "region" else None,
                    label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(markerscale=3)
        return _save(fig, path)


def regions_figure(grids, X, y, accuracies, class_names, path):
    """One panel per classifier: decision regions plus test points."""
    cmap = ListedColormap([c + "55" for c in CLASS_COLORS])
    n = len(grids)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.2), squeeze=False)
        for ax, (name, grid) in zip(axes[0], grids.items()):
            x0, x1, y0, y1 = grid.bounds
            ax.imshow(grid.labels, origin="lower", extent=(x0, x1, y0, y1), aspect="auto",
                      cmap=cmap, vmin=-0.5, vmax=len(class_names) - 0.5, interpolation="nearest")
            for k in range(len(class_names)):
                sel = y == k
                ax.scatter(X[sel, 0], X[sel, 1], s=3, color=CLASS_COLORS[k])
            ax.set_title(f"{name}  acc={accuracies[name]:.3f}")
            ax.set_xlabel("mu (L)")
        axes[0][0].set_ylabel("sigma (L)")
        return _save(fig, path)


def roc_figure(rocs, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4))
        for name, roc in rocs.items():
            ax.plot(roc.macro_fpr, roc.macro_tpr, label=f"{name} (AUC={roc.macro_auc:.4f})")
        ax.plot([0, 1], [0, 1], color="grey", ls=":")
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate (macro)")
        ax.legend(loc="lower right")
        return _save(fig, path)


def timing_figure(medians, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        names = list(medians)
        ax.bar(names, [medians[n] * 1e3 for n in names], color="#636363")
        ax.set_ylabel("median fit time (ms)")
        ax.set_yscale("log")
        ax.tick_params(axis="x", rotation=20)
        return _save(fig, path)


def grid_figure(result, path):
    with plt.rc_context({**STYLE, "axes.grid": False}):
        fig, ax = plt.subplots(figsize=(5, 4))
        im = ax.imshow(result.accuracy, origin="lower", cmap="viridis")
        ax.set_xticks(range(len(result.Cs)), [f"{c:g}" for c in result.Cs])
        ax.set_yticks(range(len(result.gammas)), [f"{g:g}" for g in result.gammas])
        ax.set_xlabel("C")
        ax.set_ylabel("gamma")
        for (i, j), acc in np.ndenumerate(result.accuracy):
            ax.text(j, i, f"{acc:.3f}", ha="center", va="center", fontsize=7, color="w")
        fig.colorbar(im, ax=ax, label="validation accuracy")
        return _save(fig, path)


def loops_figure(pv, fv, path):
    """``pv`` and ``fv`` map a class name to a LoopCurve."""
    with plt.rc_context(STYLE):
        fig, (a, b) = plt.subplots(1, 2, figsize=(8, 3.5))
        for (name, loop), color in zip(pv.items(), CLASS_COLORS):
            a.plot(loop.x, loop.y, color=color, label=name)
        for (name, loop), color in zip(fv.items(), CLASS_COLORS):
            b.plot(loop.x, loop.y, color=color, label=name)
        a.set_xlabel("P (cmH2O)")
        a.set_ylabel("V (L)")
        b.set_xlabel("V (L)")
        b.set_ylabel("flow (L/s)")
        a.legend()
        return _save(fig, path)
