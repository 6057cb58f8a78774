"""Linear mono- and bi-compartment models of tidal breathing.

Units are cmH2O, L and s throughout. Resistances are in cmH2O.s/L and
elastances in cmH2O/L.

The bi-compartment (parallel) model couples two elastic compartments through
their own bronchial resistances and a shared tracheal resistance::

    P = E1*V1 + (R1 + Rt)*dV1 + Rt*dV2
    P = E2*V2 + (R2 + Rt)*dV2 + Rt*dV1

Both simulators integrate the first-order system with a classical fixed-step
fourth-order Runge-Kutta scheme and are vectorised over subjects, so a whole
cohort is integrated in a single time loop.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class IntegrationDiverged(ArithmeticError):
    """Raised when a simulated state becomes non-finite."""


@dataclass(frozen=True)
class LungParams:
    r1: float
    r2: float
    rt: float
    e1: float
    e2: float

    def __post_init__(self):
        for name in ("r1", "r2", "rt", "e1", "e2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if self.determinant <= 0:
            raise ValueError("r1*r2 + rt*(r1 + r2) must be > 0")

    @property
    def determinant(self) -> float:
        return self.r1 * self.r2 + self.rt * (self.r1 + self.r2)

    def equivalent(self) -> "EquivalentParams":
        r_eq = self.rt + self.r1 * self.r2 / (self.r1 + self.r2)
        e_eq = self.e1 * self.e2 / (self.e1 + self.e2)
        return EquivalentParams(r_eq, e_eq)


@dataclass(frozen=True)
class EquivalentParams:
    r_eq: float
    e_eq: float

    def __post_init__(self):
        for name in ("r_eq", "e_eq"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")


class Waveform(str, enum.Enum):
    RAISED_COSINE = "raised_cosine"
    SINUSOID = "sinusoid"


@dataclass(frozen=True)
class PressureProfile:
    """Muscular driving pressure.

    ``RAISED_COSINE`` gives ``A*(1 - cos(2*pi*f*t + phase))/2`` which is
    nonnegative with mean ``A/2``; ``SINUSOID`` gives ``A*sin(2*pi*f*t + phase)``.
    """

    waveform: Waveform = Waveform.RAISED_COSINE
    amplitude: float = 5.0
    frequency: float = 0.25
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "waveform", Waveform(self.waveform))
        if not (math.isfinite(self.amplitude) and self.amplitude > 0):
            raise ValueError("amplitude must be > 0")
        if not (math.isfinite(self.frequency) and self.frequency > 0):
            raise ValueError("frequency must be > 0")

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency


@dataclass(frozen=True)
class TimeGrid:
    dt: float = 0.01
    duration: float = 60.0
    transient_cutoff: float = 20.0

    def __post_init__(self):
        if not (0 < self.dt < self.duration):
            raise ValueError("need 0 < dt < duration")
        if not (0 <= self.transient_cutoff < self.duration):
            raise ValueError("need 0 <= transient_cutoff < duration")

    @property
    def n_samples(self) -> int:
        # round-off guard: 60/0.01 evaluates to 5999.999...
        return int(math.floor(self.duration / self.dt + 1e-9)) + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt


@dataclass(frozen=True)
class VolumeSignal:
    """Sampled total volume, with optional per-compartment volumes.

    ``period`` is the breathing period of the drive when known; feature
    extraction uses it to trim the analysis window to whole cycles.
    """

    grid: TimeGrid
    values: np.ndarray
    v1: Optional[np.ndarray] = None
    v2: Optional[np.ndarray] = None
    pressure: Optional[np.ndarray] = None
    period: Optional[float] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.n_samples,):
            raise ValueError(
                f"expected {self.grid.n_samples} samples, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("volume signal contains non-finite values")

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


@dataclass(frozen=True)
class ComplexGain:
    magnitude: float
    phase: float

    @property
    def value(self) -> complex:
        return self.magnitude * complex(math.cos(self.phase), math.sin(self.phase))


def poiseuille_resistance(mu_air, length, radius):
    """Resistance ``8*mu*l/(pi*r**4)`` of a rigid tube (SI units in, Pa.s/m^3 out)."""
    for name, value in (("mu_air", mu_air), ("length", length), ("radius", radius)):
        if not value > 0:
            raise ValueError(f"{name} must be > 0, got {value!r}")
    return 8.0 * mu_air * length / (math.pi * radius**4)


def split_equivalent(eq: EquivalentParams) -> LungParams:
    """Symmetric parallel network with the given equivalent mechanics.

    ``rt = r_eq/2``, ``r1 = r2 = r_eq`` and ``e1 = e2 = 2*e_eq``.
    """
    return LungParams(
        r1=eq.r_eq, r2=eq.r_eq, rt=eq.r_eq / 2.0, e1=2.0 * eq.e_eq, e2=2.0 * eq.e_eq
    )


def transfer_function_complex(p: LungParams, s):
    """Pressure-to-volume transfer function evaluated at complex ``s``."""
    num = s * (p.r1 + p.r2) + (p.e1 + p.e2)
    den = (
        s**2 * p.determinant
        + s * ((p.r2 + p.rt) * p.e1 + (p.r1 + p.rt) * p.e2)
        + p.e1 * p.e2
    )
    return num / den


def transfer_function(p: LungParams, omega: float) -> ComplexGain:
    if omega < 0:
        raise ValueError("omega must be >= 0")
    h = transfer_function_complex(p, 1j * omega)
    return ComplexGain(abs(h), math.atan2(h.imag, h.real))


def bode(p: LungParams, omegas) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude and phase of the transfer function over an array of omegas."""
    omegas = np.asarray(omegas, dtype=float)
    if np.any(omegas < 0):
        raise ValueError("omega must be >= 0")
    h = transfer_function_complex(p, 1j * omegas)
    return np.abs(h), np.angle(h)


def sample_pressure(pp: PressureProfile, t):
    """Driving pressure at time(s) ``t``; accepts scalars or arrays."""
    arg = 2.0 * np.pi * pp.frequency * np.asarray(t, dtype=float) + pp.phase
    if pp.waveform is Waveform.RAISED_COSINE:
        out = pp.amplitude * (1.0 - np.cos(arg)) / 2.0
    else:
        out = pp.amplitude * np.sin(arg)
    return out if np.ndim(out) else float(out)


def _pressure_samples(pressure, g: TimeGrid) -> np.ndarray:
    """Pressure at every half step, length ``2*(n-1)+1``."""
    half_times = np.arange(2 * g.n_samples - 1) * (g.dt / 2.0)
    if isinstance(pressure, PressureProfile):
        return np.asarray(sample_pressure(pressure, half_times), dtype=float)
    if callable(pressure):
        return np.asarray(pressure(half_times), dtype=float) * np.ones_like(half_times)
    return np.full_like(half_times, float(pressure))


def _rk4(deriv, state: np.ndarray, p_half: np.ndarray, dt: float, n: int):
    """Fixed-step RK4 over ``n`` samples, recording every state.

    ``deriv(state, p)`` returns the time derivative for a scalar pressure ``p``.
    """
    out = np.empty((n,) + state.shape)
    out[0] = state
    half = dt / 2.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n - 1):
            p0, pm, p1 = p_half[2 * k], p_half[2 * k + 1], p_half[2 * k + 2]
            k1 = deriv(state, p0)
            k2 = deriv(state + half * k1, pm)
            k3 = deriv(state + half * k2, pm)
            k4 = deriv(state + dt * k3, p1)
            state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[k + 1] = state
    if not np.all(np.isfinite(out)):
        raise IntegrationDiverged("non-finite state during integration")
    return out


def simulate_bi_batch(r1, r2, rt, e1, e2, pressure, g: TimeGrid, v0=(0.0, 0.0)):
    """Integrate many parallel-model subjects at once.

    Parameter arguments are equal-length 1-D arrays (or scalars). ``pressure``
    is a :class:`PressureProfile`, a callable of time, or a constant.

    Returns ``(v1, v2)`` each of shape ``(n_subjects, n_samples)``.
    """
    r1, r2, rt, e1, e2 = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(a, dtype=float)) for a in (r1, r2, rt, e1, e2))
    )
    m = r1.shape[0]
    det = r1 * r2 + rt * (r1 + r2)
    if np.any(~(det > 0)):
        raise ValueError("singular resistance matrix")
    # columns of the inverse of [[r1+rt, rt], [rt, r2+rt]], each (2, m)
    col1 = np.stack((r2 + rt, -rt)) / det
    col2 = np.stack((-rt, r1 + rt)) / det
    elast = np.stack((e1, e2))

    def deriv(state, p):
        f = p - elast * state
        return col1 * f[0] + col2 * f[1]

    v0 = np.asarray(v0, dtype=float)
    state = np.empty((2, m))
    state[0] = v0[0] if v0.ndim == 1 else v0[:, 0]
    state[1] = v0[1] if v0.ndim == 1 else v0[:, 1]
    out = _rk4(deriv, state, _pressure_samples(pressure, g), g.dt, g.n_samples)
    return out[:, 0, :].T.copy(), out[:, 1, :].T.copy()


def simulate_mono_batch(r, e, pressure, g: TimeGrid, v0=0.0):
    """Integrate ``dV = (P - e*V)/r`` for many subjects; shape ``(n, n_samples)``."""
    r, e = np.broadcast_arrays(
        np.atleast_1d(np.asarray(r, dtype=float)), np.atleast_1d(np.asarray(e, dtype=float))
    )
    if np.any(~(r > 0)) or np.any(~(e > 0)):
        raise ValueError("resistance and elastance must be > 0")
    inv_r = 1.0 / r

    def deriv(state, p):
        return (p - e * state) * inv_r

    state = np.broadcast_to(np.asarray(v0, dtype=float), r.shape).astype(float)
    out = _rk4(deriv, state, _pressure_samples(pressure, g), g.dt, g.n_samples)
    return out.T.copy()


def _period_of(pressure) -> Optional[float]:
    return pressure.period if isinstance(pressure, PressureProfile) else None


def simulate_bi(
    p: LungParams,
    pp,
    g: TimeGrid = TimeGrid(),
    v0: Sequence[float] = (0.0, 0.0),
) -> VolumeSignal:
    """Total volume ``V1 + V2`` of the parallel model driven by ``pp``."""
    v1, v2 = simulate_bi_batch(p.r1, p.r2, p.rt, p.e1, p.e2, pp, g, v0)
    pressure = _pressure_samples(pp, g)[::2]
    return VolumeSignal(
        grid=g,
        values=v1[0] + v2[0],
        v1=v1[0],
        v2=v2[0],
        pressure=pressure,
        period=_period_of(pp),
    )


def simulate_mono(r: float, e: float, pp, g: TimeGrid = TimeGrid(), v0: float = 0.0):
    """Single-compartment volume response ``r*dV + e*V = P``."""
    if not (r > 0 and e > 0):
        raise ValueError("resistance and elastance must be > 0")
    v = simulate_mono_batch(r, e, pp, g, v0)[0]
    return VolumeSignal(
        grid=g, values=v, pressure=_pressure_samples(pp, g)[::2], period=_period_of(pp)
    )


def simulate_equivalent_batch(r_eq, e_eq, pp, g: TimeGrid = TimeGrid()) -> np.ndarray:
    """Total volume for many (r_eq, e_eq) subjects through the symmetric split."""
    r_eq = np.atleast_1d(np.asarray(r_eq, dtype=float))
    e_eq = np.atleast_1d(np.asarray(e_eq, dtype=float))
    if np.any(~(r_eq > 0)) or np.any(~(e_eq > 0)):
        raise ValueError("r_eq and e_eq must be > 0")
    v1, v2 = simulate_bi_batch(r_eq, r_eq, r_eq / 2.0, 2.0 * e_eq, 2.0 * e_eq, pp, g)
    return v1 + v2


def write_signal_csv(path, sig: VolumeSignal) -> None:
    """Write ``t,v,v1,v2,p`` rows at full double precision."""
    n = sig.grid.n_samples
    nan = np.full(n, np.nan)
    cols = [
        sig.times,
        sig.values,
        sig.v1 if sig.v1 is not None else nan,
        sig.v2 if sig.v2 is not None else nan,
        sig.pressure if sig.pressure is not None else nan,
    ]
    with open(path, "w", newline="") as fh:
        fh.write("t,v,v1,v2,p\n")
        for row in zip(*cols):
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")


def read_signal_csv(path, transient_cutoff: float = 20.0) -> VolumeSignal:
    """Load a ``t,v,...`` CSV written by :func:`write_signal_csv`.

    The time grid is reconstructed from the first two samples.
    """
    data = np.genfromtxt(path, delimiter=",", names=True)
    t = np.atleast_1d(data["t"])
    dt = float(t[1] - t[0])
    grid = TimeGrid(dt=dt, duration=float(t[-1] - t[0]), transient_cutoff=transient_cutoff)
    extra = {}
    for name in ("v1", "v2"):
        if name in data.dtype.names and np.all(np.isfinite(data[name])):
            extra[name] = np.asarray(data[name])
    if "p" in data.dtype.names and np.all(np.isfinite(data["p"])):
        extra["pressure"] = np.asarray(data["p"])
    return VolumeSignal(grid=grid, values=np.asarray(data["v"]), **extra)


@dataclass(frozen=True)
class SimConfig:
    """Drive and time grid shared by every simulation in a run."""

    pressure: PressureProfile = PressureProfile()
    grid: TimeGrid = TimeGrid()
