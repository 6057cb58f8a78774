"""Seeded synthetic cohorts in (r_eq, e_eq) space."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lung_model import EquivalentParams

MAX_REJECTIONS = 1000


class Label(enum.IntEnum):
    HEALTHY = 0
    ASTHMA = 1
    FIBROSIS = 2

    @property
    def slug(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, str):
            return cls[value.strip().upper()]
        return cls(int(value))


LABEL_NAMES = tuple(label.slug for label in Label)


class Preset(str, enum.Enum):
    PAPER_STATED = "paper-stated"
    REPRODUCTION = "reproduction"
    SPREAD_STUDY = "spread-study"


class CohortError(ValueError):
    pass


@dataclass(frozen=True)
class ClassSpec:
    label: Label
    mean_r: float
    mean_e: float
    sigma_r: float
    sigma_e: float

    def __post_init__(self):
        object.__setattr__(self, "label", Label.parse(self.label))
        if self.mean_r <= 0 or self.mean_e <= 0:
            raise CohortError("class means must be > 0")
        if self.sigma_r < 0 or self.sigma_e < 0:
            raise CohortError("class sigmas must be >= 0")


@dataclass(frozen=True)
class Subject:
    id: int
    label: Label
    eq: EquivalentParams


@dataclass(frozen=True)
class CohortConfig:
    specs: Sequence[ClassSpec]
    n_per_class: int = 1000
    seed: int = 0
    floors: tuple[float, float] = (0.2, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        if self.n_per_class <= 0:
            raise CohortError("n_per_class must be > 0")
        labels = [s.label for s in self.specs]
        if len(labels) != 3 or len(set(labels)) != 3:
            raise CohortError("need exactly three distinct class labels")


_MEANS = {Label.HEALTHY: (3.0, 10.0), Label.ASTHMA: (5.0, 10.0), Label.FIBROSIS: (3.0, 20.0)}
_SIGMAS = {
    Preset.PAPER_STATED: (0.5, 5.0),
    # the stated 5 read as a variance: sqrt(5) rounded
    Preset.REPRODUCTION: (0.5, 2.24),
    Preset.SPREAD_STUDY: (1.0, 3.5),
}


def default_class_specs(preset=Preset.REPRODUCTION) -> list[ClassSpec]:
    sigma_r, sigma_e = _SIGMAS[Preset(preset)]
    return [ClassSpec(label, r, e, sigma_r, sigma_e) for label, (r, e) in _MEANS.items()]


def subject_rng(seed: int, subject_id: int) -> np.random.Generator:
    """Independent stream per subject so output is order- and thread-independent."""
    return np.random.default_rng([int(seed), int(subject_id)])


def sample_subject(spec: ClassSpec, rng, subject_id=0, floors=(0.2, 1.0)) -> Subject:
    r_min, e_min = floors
    for _ in range(MAX_REJECTIONS + 1):
        r = float(spec.mean_r + spec.sigma_r * rng.standard_normal())
        e = float(spec.mean_e + spec.sigma_e * rng.standard_normal())
        if r >= r_min and e >= e_min:
            return Subject(subject_id, spec.label, EquivalentParams(r, e))
    raise CohortError(
        f"more than {MAX_REJECTIONS} consecutive draws fell below the floors "
        f"for {spec.label.slug}"
    )


def generate_cohort(cfg: CohortConfig) -> list[Subject]:
    """``n_per_class`` subjects per class, ids ``0..3n-1`` in class-major order."""
    specs = sorted(cfg.specs, key=lambda s: s.label)
    out = []
    for k, spec in enumerate(specs):
        for j in range(cfg.n_per_class):
            sid = k * cfg.n_per_class + j
            out.append(sample_subject(spec, subject_rng(cfg.seed, sid), sid, cfg.floors))
    return out


def cohort_arrays(subjects: Sequence[Subject]):
    """``(ids, labels, r_eq, e_eq)`` as numpy arrays."""
    ids = np.array([s.id for s in subjects], dtype=np.int64)
    labels = np.array([int(s.label) for s in subjects], dtype=np.int64)
    r = np.array([s.eq.r_eq for s in subjects], dtype=float)
    e = np.array([s.eq.e_eq for s in subjects], dtype=float)
    return ids, labels, r, e


def write_cohort_csv(path, subjects: Sequence[Subject]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("id,label,r_eq,e_eq\n")
        for s in subjects:
            fh.write(f"{s.id},{s.label.slug},{s.eq.r_eq:.17g},{s.eq.e_eq:.17g}\n")


def read_cohort_csv(path) -> list[Subject]:
    with open(path, newline="") as fh:
        return [
            Subject(
                int(row["id"]),
                Label.parse(row["label"]),
                EquivalentParams(float(row["r_eq"]), float(row["e_eq"])),
            )
            for row in csv.DictReader(fh)
        ]
