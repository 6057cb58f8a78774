"""Physiological acceptance region in (mu, sigma) feature space.

The boundary of a rectangle of plausible (r_eq, e_eq) values is pushed
through simulate-then-extract; the image curve, closed into a polygon, is the
set of acceptable measurements. Anything outside is flagged as a wrong
acquisition instead of being classified.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .cohort import ClassSpec
from .features import FeatureVector, feature_map
from .lung_model import SimConfig

WRONG_ACQUISITION_MESSAGE = (
    "wrong acquisition: measurement lies outside the physiological region, "
    "please repeat the recording"
)


class ValidityError(ValueError):
    pass


@dataclass(frozen=True)
class ParamRectangle:
    r_min: float = 1.0
    r_max: float = 8.0
    e_min: float = 4.0
    e_max: float = 32.0

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max and 0 < self.e_min < self.e_max):
            raise ValidityError("rectangle needs 0 < min < max on both axes")

    def contains(self, r, e):
        r, e = np.asarray(r), np.asarray(e)
        return (r >= self.r_min) & (r <= self.r_max) & (e >= self.e_min) & (e <= self.e_max)


@dataclass(frozen=True)
class FeaturePolygon:
    vertices: np.ndarray  # (m, 2), implicitly closed

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValidityError("vertices must have shape (m, 2)")
        if len(v) > 1 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise ValidityError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise ValidityError("polygon vertices must be finite")
        object.__setattr__(self, "vertices", v)

    @property
    def edges(self):
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def area(self) -> float:
        x, y = self.vertices.T
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def rectangle_boundary(rect: ParamRectangle, samples_per_edge=200):
    """Counterclockwise walk ``(r, e)`` around the rectangle, corners first on each edge."""
    t = np.arange(samples_per_edge) / samples_per_edge
    r0, r1, e0, e1 = rect.r_min, rect.r_max, rect.e_min, rect.e_max
    r = np.concatenate([r0 + (r1 - r0) * t, np.full_like(t, r1), r1 - (r1 - r0) * t, np.full_like(t, r0)])
    e = np.concatenate([np.full_like(t, e0), e0 + (e1 - e0) * t, np.full_like(t, e1), e1 - (e1 - e0) * t])
    return r, e


def map_rectangle_boundary(rect: ParamRectangle = ParamRectangle(), samples_per_edge=200,
                           sim: SimConfig = SimConfig()) -> FeaturePolygon:
    r, e = rectangle_boundary(rect, samples_per_edge)
    try:
        mu, sigma = feature_map(r, e, sim)
    except (ArithmeticError, ValueError) as exc:
        raise ValidityError(f"boundary simulation failed: {exc}") from exc
    return FeaturePolygon(np.c_[mu, sigma])


def _on_segment(px, py, ax, ay, bx, by, eps):
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    scale = np.hypot(bx - ax, by - ay)
    near_line = np.abs(cross) <= eps * np.maximum(scale, 1e-300)
    within = (
        (px >= np.minimum(ax, bx) - eps) & (px <= np.maximum(ax, bx) + eps)
        & (py >= np.minimum(ay, by) - eps) & (py <= np.maximum(ay, by) + eps)
    )
    return near_line & within


def contains_points(poly: FeaturePolygon, points, eps=1e-12) -> np.ndarray:
    """Even-odd ray casting; points within ``eps`` of an edge count as inside."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    px, py = pts[:, 0:1], pts[:, 1:2]
    a, b = poly.edges
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    # half-open rule on y avoids double counting shared vertices
    straddles = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
    crossings = np.count_nonzero(straddles & (px < x_cross), axis=1)
    inside = crossings % 2 == 1
    on_edge = _on_segment(px, py, ax, ay, bx, by, eps).any(axis=1)
    return inside | on_edge


def contains(poly: FeaturePolygon, fv) -> bool:
    point = fv.as_array() if isinstance(fv, FeatureVector) else np.asarray(fv, dtype=float)
    return bool(contains_points(poly, point[None, :])[0])


class Verdict(str, enum.Enum):
    ACCEPTED = "accepted"
    WRONG_ACQUISITION = "wrong_acquisition"


@dataclass(frozen=True)
class ValidationResult:
    verdict: Verdict
    message: str

    @property
    def accepted(self) -> bool:
        return self.verdict is Verdict.ACCEPTED

    def to_json(self, record_id) -> str:
        return json.dumps({"id": record_id, "verdict": self.verdict.value, "message": self.message})


def validate_measurement(poly: FeaturePolygon, fv) -> ValidationResult:
    if contains(poly, fv):
        return ValidationResult(Verdict.ACCEPTED, "accepted: measurement is physiological")
    return ValidationResult(Verdict.WRONG_ACQUISITION, WRONG_ACQUISITION_MESSAGE)


@dataclass(frozen=True)
class ClassEllipse:
    """Axis-aligned ellipse; ``width``/``height`` are full axis lengths."""

    center: tuple[float, float]
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValidityError("ellipse axes must be > 0")

    def boundary(self, n=256):
        theta = 2.0 * np.pi * np.arange(n) / n
        r = self.center[0] + 0.5 * self.width * np.cos(theta)
        e = self.center[1] + 0.5 * self.height * np.sin(theta)
        return r, e


def class_ellipse(spec: ClassSpec, factor=3.0) -> ClassEllipse:
    return ClassEllipse((spec.mean_r, spec.mean_e), factor * spec.sigma_r, factor * spec.sigma_e)


def map_ellipse(ell: ClassEllipse, n=256, sim: SimConfig = SimConfig(), floors=(0.2, 1.0)):
    """Closed ``(n + 1, 2)`` feature-space image of the ellipse boundary."""
    r, e = ell.boundary(n)
    if np.any(r < floors[0]) or np.any(e < floors[1]):
        raise ValidityError("ellipse leaves the admissible parameter region")
    mu, sigma = feature_map(r, e, sim)
    curve = np.c_[mu, sigma]
    return np.vstack([curve, curve[:1]])


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                       - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))
    return (orient(p1, p2, q1) * orient(p1, p2, q2) < 0) & (orient(q1, q2, p1) * orient(q1, q2, p2) < 0)


def is_simple(poly: FeaturePolygon) -> bool:
    """True when no two non-adjacent edges properly cross."""
    a, b = poly.edges
    m = len(a)
    i, j = np.triu_indices(m, k=2)
    keep = ~((i == 0) & (j == m - 1))
    i, j = i[keep], j[keep]
    return not np.any(_segments_intersect(a[i], b[i], a[j], b[j]))


def write_polygon_csv(path, poly: FeaturePolygon) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("mu,sigma\n")
        for mu, sigma in poly.vertices:
            fh.write(f"{mu:.17g},{sigma:.17g}\n")


def read_polygon_csv(path) -> FeaturePolygon:
    return FeaturePolygon(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))
