"""Versioned run configuration.

Configs are JSON or YAML documents mirroring :class:`RunConfig`; unknown keys
are rejected at every nesting level so typos never pass silently.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .cohort import CohortConfig, Preset, default_class_specs
from .lung_model import PressureProfile, SimConfig, TimeGrid
from .validity import ParamRectangle

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class SimulationSettings:
    waveform: str = "raised_cosine"
    amplitude: float = 5.0
    frequency: float = 0.25
    phase: float = 0.0
    dt: float = 0.01
    duration: float = 60.0
    transient_cutoff: float = 20.0

    def build(self) -> SimConfig:
        return SimConfig(
            PressureProfile(self.waveform, self.amplitude, self.frequency, self.phase),
            TimeGrid(self.dt, self.duration, self.transient_cutoff),
        )


@dataclass
class CohortSettings:
    n_per_class: int = 1000
    floors: list = field(default_factory=lambda: [0.2, 1.0])


@dataclass
class LogregSettings:
    l2_strength: float = 1.0
    tol: float = 1e-6
    max_iter: int = 100


@dataclass
class PerceptronSettings:
    eta: float = 1.0
    max_epochs: int = 50


@dataclass
class SvmSettings:
    gamma: float = 1.0
    C: float = 1.0
    tol: float = 1e-3
    max_iter: int = 100_000


@dataclass
class ForestSettings:
    n_trees: int = 100
    max_features: str = "sqrt"
    bootstrap: bool = True


@dataclass
class ClassifierSettings:
    enabled: list = field(
        default_factory=lambda: ["gaussian_nb", "logreg", "perceptron", "svm_rbf", "random_forest"]
    )
    logreg: LogregSettings = field(default_factory=LogregSettings)
    perceptron: PerceptronSettings = field(default_factory=PerceptronSettings)
    svm_rbf: SvmSettings = field(default_factory=SvmSettings)
    random_forest: ForestSettings = field(default_factory=ForestSettings)


@dataclass
class EvalSettings:
    test_fraction: float = 0.2
    region_resolution: int = 300
    timing_repetitions: int = 5


@dataclass
class ValiditySettings:
    rectangle: list = field(default_factory=lambda: [1.0, 8.0, 4.0, 32.0])
    samples_per_edge: int = 200
    ellipse_points: int = 256
    ellipse_preset: str = "spread-study"
    measurements: list = field(default_factory=list)

    def build_rectangle(self) -> ParamRectangle:
        return ParamRectangle(*map(float, self.rectangle))


@dataclass
class GridSettings:
    gammas: list = field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0, 100.0])
    Cs: list = field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0, 1000.0])
    folds: int = 5


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    preset: str = Preset.REPRODUCTION.value
    seed: int = 42
    out: str = "runs/default"
    figures: bool = True
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    cohort: CohortSettings = field(default_factory=CohortSettings)
    classifiers: ClassifierSettings = field(default_factory=ClassifierSettings)
    evaluation: EvalSettings = field(default_factory=EvalSettings)
    validity: ValiditySettings = field(default_factory=ValiditySettings)
    grid: GridSettings = field(default_factory=GridSettings)

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version!r}")
        try:
            Preset(self.preset)
        except ValueError:
            raise ConfigError(f"unknown preset {self.preset!r}") from None
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _build(cls, data, "config")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def sim_config(self) -> SimConfig:
        return self.simulation.build()

    def cohort_config(self) -> CohortConfig:
        return CohortConfig(
            default_class_specs(self.preset),
            self.cohort.n_per_class,
            stage_seed(self.seed, "cohort"),
            tuple(self.cohort.floors),
        )


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if known[name].default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    text = Path(path).read_text()
    if str(path).endswith((".yaml", ".yml")):
        import yaml

        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    return RunConfig.from_dict(data)


def stage_seed(seed: int, stage: str) -> int:
    """Independent 64-bit seed for a named pipeline stage."""
    state = np.random.SeedSequence([int(seed), zlib.crc32(stage.encode())]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])
