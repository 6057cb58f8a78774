"""End-to-end runs: cohort -> simulate -> features -> split -> fit -> metrics."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .cohort import LABEL_NAMES, cohort_arrays, default_class_specs, generate_cohort, write_cohort_csv
from .config import RunConfig, stage_seed
from .evaluation import (
    accuracy,
    confusion_matrix,
    decision_region_grid,
    default_bounds,
    roc_macro,
    split_dataset,
    time_training,
    write_region_csv,
    write_roc_csv,
)
from .features import feature_map, fv_loop, pv_loop, write_features_csv
from .learn import (
    fit_gaussian_nb,
    fit_logreg,
    fit_perceptron,
    fit_random_forest,
    fit_svm_rbf,
    grid_search_svm,
    write_grid_csv,
)
from .lung_model import EquivalentParams, bode, simulate_bi, split_equivalent
from .validity import (
    class_ellipse,
    map_ellipse,
    map_rectangle_boundary,
    validate_measurement,
    write_polygon_csv,
)

log = logging.getLogger(__name__)

CLASSES = (0, 1, 2)
THREADS_ENV = "TIDALML_THREADS"


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage
        self.cause = exc


@dataclass
class Dataset:
    ids: np.ndarray
    labels: np.ndarray
    r_eq: np.ndarray
    e_eq: np.ndarray
    X: np.ndarray


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _stage(name):
    def deco(fn):
        def wrapper(*args, **kwargs):
            log.info("stage %s", name)
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except OSError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc

        return wrapper

    return deco


@_stage("cohort")
def build_cohort(cfg: RunConfig):
    return generate_cohort(cfg.cohort_config())


@_stage("features")
def build_dataset(cfg: RunConfig, subjects) -> Dataset:
    ids, labels, r, e = cohort_arrays(subjects)
    mu, sigma = feature_map(r, e, cfg.sim_config())
    return Dataset(ids, labels, r, e, np.c_[mu, sigma])


def fitters(cfg: RunConfig, seed: int) -> dict:
    """Name -> ``fit(X, y)`` for every enabled classifier."""
    c = cfg.classifiers
    table = {
        "gaussian_nb": partial(fit_gaussian_nb, classes=CLASSES),
        "logreg": partial(fit_logreg, l2_strength=c.logreg.l2_strength, tol=c.logreg.tol,
                          max_iter=c.logreg.max_iter, classes=CLASSES),
        "perceptron": partial(fit_perceptron, eta=c.perceptron.eta,
                              max_epochs=c.perceptron.max_epochs,
                              seed=stage_seed(seed, "perceptron"), classes=CLASSES),
        "svm_rbf": partial(fit_svm_rbf, gamma=c.svm_rbf.gamma, C=c.svm_rbf.C, tol=c.svm_rbf.tol,
                           max_iter=c.svm_rbf.max_iter, classes=CLASSES),
        "random_forest": partial(fit_random_forest, n_trees=c.random_forest.n_trees,
                                 max_features=c.random_forest.max_features,
                                 bootstrap=c.random_forest.bootstrap,
                                 seed=stage_seed(seed, "random_forest"), classes=CLASSES,
                                 n_jobs=n_threads()),
    }
    unknown = set(c.enabled) - set(table)
    if unknown:
        raise ValueError(f"unknown classifiers {sorted(unknown)}")
    return {name: table[name] for name in c.enabled}


def evaluate_models(cfg: RunConfig, data: Dataset, split, fits=None):
    """Fit every enabled classifier on the training split and score the test split.

    Returns ``(models, metrics, rocs)``.
    """
    fits = fits or fitters(cfg, cfg.seed)
    Xtr, ytr = data.X[split.train], data.labels[split.train]
    Xte, yte = data.X[split.test], data.labels[split.test]
    models, metrics, rocs = {}, {}, {}
    for name, fit in fits.items():
        try:
            model = fit(Xtr, ytr)
        except Exception as exc:
            raise StageError(f"fit:{name}", exc) from exc
        scores = model.score(Xte)
        pred = model.classes[np.argmax(scores, axis=1)]
        roc = roc_macro(scores, yte, model.classes)
        models[name], rocs[name] = model, roc
        metrics[name] = {
            "accuracy": accuracy(yte, pred),
            "train_accuracy": accuracy(ytr, model.predict(Xtr)),
            "auc": {LABEL_NAMES[k]: float(a) for k, a in zip(model.classes, roc.auc)},
            "macro_auc": roc.macro_auc,
            "confusion": confusion_matrix(yte, pred, len(CLASSES)).tolist(),
            "status": model.status,
        }
    return models, metrics, rocs


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_pipeline(cfg: RunConfig, out=None, figures=None) -> dict:
    out = Path(out or cfg.out)
    figures = cfg.figures if figures is None else figures
    out.mkdir(parents=True, exist_ok=True)
    (out / "models").mkdir(exist_ok=True)

    subjects = build_cohort(cfg)
    write_cohort_csv(out / "cohort.csv", subjects)
    data = build_dataset(cfg, subjects)
    write_features_csv(out / "features.csv", data.ids, data.labels, data.X[:, 0], data.X[:, 1],
                       LABEL_NAMES)

    try:
        split = split_dataset(data.ids.size, data.labels, cfg.evaluation.test_fraction,
                              stage_seed(cfg.seed, "split"))
    except Exception as exc:
        raise StageError("split", exc) from exc
    with open(out / "split.csv", "w") as fh:
        fh.write("id,split\n")
        role = np.empty(data.ids.size, dtype=object)
        role[split.train], role[split.test] = "train", "test"
        for i, r in zip(data.ids, role):
            fh.write(f"{i},{r}\n")

    fits = fitters(cfg, cfg.seed)
    models, metrics, rocs = evaluate_models(cfg, data, split, fits)
    bounds = default_bounds(data.X)
    grids = {}
    try:
        for name, model in models.items():
            model.save(out / "models" / f"{name}.json")
            write_roc_csv(out / f"roc_{name}.csv", rocs[name], LABEL_NAMES)
            grids[name] = decision_region_grid(model, bounds, cfg.evaluation.region_resolution)
            write_region_csv(out / f"regions_{name}.csv", grids[name], LABEL_NAMES)
    except OSError:
        raise
    except Exception as exc:
        raise StageError("evaluate", exc) from exc

    metrics_doc = {
        "preset": cfg.preset,
        "seed": cfg.seed,
        "n_train": int(split.train.size),
        "n_test": int(split.test.size),
        "classifiers": metrics,
    }
    _dump_json(out / "metrics.json", metrics_doc)

    try:
        timing = time_training(data.X[split.train], data.labels[split.train], fits,
                               cfg.evaluation.timing_repetitions)
    except Exception as exc:
        raise StageError("timing", exc) from exc
    _dump_json(out / "timing.json", {
        "repetitions": timing.repetitions,
        "median_seconds": timing.median,
        "durations_seconds": timing.durations,
    })

    if figures:
        try:
            _pipeline_figures(cfg, out / "figures", data, split, grids, metrics, rocs, timing)
        except Exception as exc:
            raise StageError("figures", exc) from exc

    manifest = {
        "tool": "tidalml",
        "version": __version__,
        "schema_version": cfg.schema_version,
        "seed": cfg.seed,
        "preset": cfg.preset,
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "artifacts": sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()),
    }
    _dump_json(out / "manifest.json", manifest)
    return {"metrics": metrics_doc, "timing": timing.median, "out": str(out)}


def _pipeline_figures(cfg, fig_dir, data, split, grids, metrics, rocs, timing):
    fig_dir.mkdir(exist_ok=True)
    sim = cfg.sim_config()
    specs = default_class_specs(cfg.preset)
    plotting.scatter_figure(data.r_eq, data.e_eq, data.labels, LABEL_NAMES,
                            fig_dir / "cohort.png", "R_eq (cmH2O.s/L)", "E_eq (cmH2O/L)")
    plotting.scatter_figure(data.X[:, 0], data.X[:, 1], data.labels, LABEL_NAMES,
                            fig_dir / "features.png", "mu (L)", "sigma (L)")
    signals, pv, fv = {}, {}, {}
    omegas = np.logspace(-2, 2, 200)
    curves = {}
    for spec in specs:
        p = split_equivalent(EquivalentParams(spec.mean_r, spec.mean_e))
        sig = simulate_bi(p, sim.pressure, sim.grid)
        signals[spec.label.slug] = sig.values
        pv[spec.label.slug] = pv_loop(sig, sim.pressure)
        fv[spec.label.slug] = fv_loop(sig)
        curves[spec.label.slug] = bode(p, omegas)
    plotting.signals_figure(sim.grid.times, signals, fig_dir / "signals.png")
    plotting.loops_figure(pv, fv, fig_dir / "loops.png")
    plotting.bode_figure(omegas, curves, fig_dir / "bode.png")
    Xte, yte = data.X[split.test], data.labels[split.test]
    plotting.regions_figure(grids, Xte, yte, {n: m["accuracy"] for n, m in metrics.items()},
                            LABEL_NAMES, fig_dir / "regions.png")
    plotting.roc_figure(rocs, fig_dir / "roc.png")
    plotting.timing_figure(timing.median, fig_dir / "timing.png")


def run_validity(cfg: RunConfig, out=None, measurements=(), figures=None):
    """Polygon, class ellipses, and verdicts for the given (id, mu, sigma) records."""
    out = Path(out or cfg.out)
    figures = cfg.figures if figures is None else figures
    out.mkdir(parents=True, exist_ok=True)
    sim = cfg.sim_config()
    v = cfg.validity
    try:
        poly = map_rectangle_boundary(v.build_rectangle(), v.samples_per_edge, sim)
        ellipses = {}
        for spec in default_class_specs(v.ellipse_preset):
            ell = class_ellipse(spec)
            ellipses[spec.label.slug] = (ell, map_ellipse(ell, v.ellipse_points, sim,
                                                          tuple(cfg.cohort.floors)))
    except Exception as exc:
        raise StageError("validity", exc) from exc
    write_polygon_csv(out / "polygon.csv", poly)
    for name, (_, curve) in ellipses.items():
        with open(out / f"ellipse_{name}.csv", "w") as fh:
            fh.write("mu,sigma\n")
            for m, s in curve:
                fh.write(f"{m:.17g},{s:.17g}\n")
    lines = []
    for rec_id, mu, sigma in measurements:
        lines.append(validate_measurement(poly, np.array([mu, sigma])).to_json(rec_id))
    with open(out / "verdicts.jsonl", "w") as fh:
        fh.writelines(line + "\n" for line in lines)
    if figures:
        (out / "figures").mkdir(exist_ok=True)
        rect = v.build_rectangle()
        rect_pts = np.array([[rect.r_min, rect.e_min], [rect.r_max, rect.e_min],
                             [rect.r_max, rect.e_max], [rect.r_min, rect.e_max]])
        param_curves = {"region": rect_pts}
        feat_curves = {"region": poly.vertices}
        for name, (ell, curve) in ellipses.items():
            r, e = ell.boundary(v.ellipse_points)
            param_curves[name] = np.c_[r, e]
            feat_curves[name] = curve[:-1]
        empty = np.empty(0)
        plotting.scatter_figure(empty, empty, np.empty(0, dtype=int), LABEL_NAMES,
                                out / "figures" / "validity_params.png",
                                "R_eq (cmH2O.s/L)", "E_eq (cmH2O/L)", param_curves)
        plotting.scatter_figure(empty, empty, np.empty(0, dtype=int), LABEL_NAMES,
                                out / "figures" / "validity_features.png",
                                "mu (L)", "sigma (L)", feat_curves)
    return poly, lines


def run_grid(cfg: RunConfig, out=None, figures=None):
    out = Path(out or cfg.out)
    figures = cfg.figures if figures is None else figures
    out.mkdir(parents=True, exist_ok=True)
    data = build_dataset(cfg, build_cohort(cfg))
    split = split_dataset(data.ids.size, data.labels, cfg.evaluation.test_fraction,
                          stage_seed(cfg.seed, "split"))
    try:
        result = grid_search_svm(data.X[split.train], data.labels[split.train], cfg.grid.gammas,
                                 cfg.grid.Cs, cfg.grid.folds, stage_seed(cfg.seed, "grid"),
                                 tol=cfg.classifiers.svm_rbf.tol)
    except Exception as exc:
        raise StageError("grid", exc) from exc
    write_grid_csv(out / "grid.csv", result)
    if figures:
        (out / "figures").mkdir(exist_ok=True)
        plotting.grid_figure(result, out / "figures" / "grid.png")
    return result
