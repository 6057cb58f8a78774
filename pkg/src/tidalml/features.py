"""Signal features (mean, standard deviation) and PV / FV loop curves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lung_model import (
    PressureProfile,
    SimConfig,
    TimeGrid,
    VolumeSignal,
    sample_pressure,
    simulate_equivalent_batch,
)


@dataclass(frozen=True)
class FeatureVector:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)):
            raise ValueError("features must be finite")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma])


@dataclass(frozen=True)
class LoopCurve:
    kind: str
    x: np.ndarray
    y: np.ndarray


def analysis_window(grid: TimeGrid, period: Optional[float] = None) -> slice:
    """Index range of post-transient samples, trimmed to whole periods.

    Trimming only happens when the period is an integer number of steps and
    at least one full period is available.
    """
    start = int(np.ceil(grid.transient_cutoff / grid.dt - 1e-9))
    stop = grid.n_samples
    if period:
        steps = period / grid.dt
        per = int(round(steps))
        if per > 0 and abs(steps - per) < 1e-6:
            whole = (stop - start) // per
            if whole >= 1:
                stop = start + whole * per
    return slice(start, stop)


def extract_features_batch(volumes, grid: TimeGrid, period=None):
    """Mean and population std of each row of ``volumes`` over the window."""
    volumes = np.atleast_2d(np.asarray(volumes, dtype=float))
    window = volumes[:, analysis_window(grid, period)]
    if window.shape[1] < 2:
        raise ValueError("post-transient window needs at least 2 samples")
    return window.mean(axis=1), window.std(axis=1)


def extract_features(sig: VolumeSignal) -> FeatureVector:
    mu, sigma = extract_features_batch(sig.values, sig.grid, sig.period)
    return FeatureVector(float(mu[0]), float(sigma[0]))


def flow(sig: VolumeSignal) -> np.ndarray:
    """dV/dt by central differences inside, one-sided at both ends (L/s)."""
    if sig.grid.n_samples < 3:
        raise ValueError("flow needs at least 3 samples")
    return np.gradient(sig.values, sig.grid.dt)


def _loop_window(sig: VolumeSignal) -> slice:
    start = int(np.ceil(sig.grid.transient_cutoff / sig.grid.dt - 1e-9))
    if start >= sig.grid.n_samples:
        raise ValueError("empty post-transient window")
    return slice(start, sig.grid.n_samples)


def pv_loop(sig: VolumeSignal, pp: Optional[PressureProfile] = None) -> LoopCurve:
    """Pressure-volume pairs over the post-transient window."""
    w = _loop_window(sig)
    if pp is not None:
        pressure = np.asarray(sample_pressure(pp, sig.times))
    elif sig.pressure is not None:
        pressure = sig.pressure
    else:
        raise ValueError("no pressure available for the PV loop")
    return LoopCurve("pressure-volume", pressure[w].copy(), sig.values[w].copy())


def fv_loop(sig: VolumeSignal) -> LoopCurve:
    """Volume-flow pairs over the post-transient window."""
    w = _loop_window(sig)
    return LoopCurve("flow-volume", sig.values[w].copy(), flow(sig)[w])


def write_features_csv(path, ids, labels, mu, sigma, label_names) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("id,label,mu,sigma\n")
        for i, lab, m, s in zip(ids, labels, mu, sigma):
            fh.write(f"{int(i)},{label_names[int(lab)]},{m:.17g},{s:.17g}\n")


def write_loop_csv(path, loop: LoopCurve) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# loop: {loop.kind}\n")
        fh.write("x,y\n")
        for x, y in zip(loop.x, loop.y):
            fh.write(f"{x:.17g},{y:.17g}\n")


def feature_map(r_eq, e_eq, sim: SimConfig = SimConfig(), chunk=2000):
    """(mu, sigma) arrays for equivalent parameters, via the symmetric split."""
    r_eq, e_eq = np.broadcast_arrays(np.atleast_1d(r_eq), np.atleast_1d(e_eq))
    mu = np.empty(r_eq.shape, dtype=float)
    sigma = np.empty(r_eq.shape, dtype=float)
    for start in range(0, r_eq.size, chunk):
        part = slice(start, start + chunk)
        volumes = simulate_equivalent_batch(r_eq[part], e_eq[part], sim.pressure, sim.grid)
        mu[part], sigma[part] = extract_features_batch(volumes, sim.grid, sim.pressure.period)
    return mu, sigma
