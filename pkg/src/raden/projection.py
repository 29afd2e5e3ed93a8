"""Empirical Radon projections: counting observations in half spaces and balls.

A half space is ``{x : (x - center) . theta <= s}`` and a ball is
``{x : |x - c| <= s}``, both with closed boundaries so constructed ties are
counted (ties occur with probability zero for continuous densities).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ValidationError
from .grid import PixelGrid

__all__ = [
    "HalfSpaceSet",
    "BallSet",
    "MeasurementVector",
    "count_half_space",
    "count_ball",
    "make_halfspace_geometry",
    "make_ball_geometry",
    "measure",
    "save_geometry",
    "load_geometry",
    "save_measurements",
    "load_measurements",
]

_UNIT_TOL = 1e-12


def _check_directions(directions: np.ndarray, tol: float = _UNIT_TOL) -> None:
    norms = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValidationError("directions must have unit Euclidean norm")


@dataclass(frozen=True)
class HalfSpaceSet:
    """Cartesian product of offsets and unit directions, direction-major.

    Row ``j = d * len(offsets) + k`` is the half space with direction
    ``directions[d]`` and offset ``offsets[k]`` measured from ``center``.
    """

    directions: np.ndarray
    offsets: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        offs = np.asarray(self.offsets, dtype=float).ravel()
        ctr = np.asarray(self.center, dtype=float).ravel()
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "offsets", offs)
        object.__setattr__(self, "center", ctr)
        if dirs.shape[1] != ctr.shape[0]:
            raise ValidationError("center dimension must match directions")
        _check_directions(dirs)
        if offs.size == 0 or np.any(np.diff(offs) <= 0):
            raise ValidationError("offsets must be strictly increasing and nonempty")

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def row_count(self) -> int:
        return self.directions.shape[0] * self.offsets.shape[0]

    def row_params(self, j: int):
        """(offset, direction) of row ``j`` in the absolute frame."""
        noff = self.offsets.shape[0]
        d, k = divmod(int(j), noff)
        theta = self.directions[d]
        return float(self.offsets[k] + self.center @ theta), theta


@dataclass(frozen=True)
class BallSet:
    """Cartesian product of centers and radii, center-major (radius fastest)."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        ctrs = np.atleast_2d(np.asarray(self.centers, dtype=float))
        radii = np.asarray(self.radii, dtype=float).ravel()
        object.__setattr__(self, "centers", ctrs)
        object.__setattr__(self, "radii", radii)
        if radii.size == 0 or radii[0] <= 0 or np.any(np.diff(radii) <= 0):
            raise ValidationError("radii must be strictly positive and strictly increasing")

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def row_count(self) -> int:
        return self.centers.shape[0] * self.radii.shape[0]

    def row_params(self, j: int):
        """(center, radius) of row ``j``."""
        nrad = self.radii.shape[0]
        c, k = divmod(int(j), nrad)
        return self.centers[c], float(self.radii[k])


@dataclass(frozen=True)
class MeasurementVector:
    """Stacked per-row counts, raw or divided by the sample count m."""

    values: np.ndarray
    normalization: str  # "raw-counts" | "per-m"
    m: int

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())
        if self.normalization not in ("raw-counts", "per-m"):
            raise ValidationError("normalization must be 'raw-counts' or 'per-m'")


def count_half_space(cloud, s: float, theta) -> int:
    """Number of points with ``x . theta <= s``."""
    theta = np.asarray(theta, dtype=float).ravel()
    if abs(np.linalg.norm(theta) - 1.0) > 1e-9:
        raise ValidationError("theta must be a unit vector")
    pts = _points(cloud)
    if pts.shape[0] == 0:
        return 0
    if pts.shape[1] != theta.shape[0]:
        raise ValidationError("point and direction dimensions differ")
    return int(np.count_nonzero(pts @ theta <= s))


def count_ball(cloud, center, s: float) -> int:
    """Number of points with ``|x - center| <= s``."""
    if s < 0:
        raise ValidationError("radius must be nonnegative")
    center = np.asarray(center, dtype=float).ravel()
    pts = _points(cloud)
    if pts.shape[0] == 0:
        return 0
    if pts.shape[1] != center.shape[0]:
        raise ValidationError("point and center dimensions differ")
    d2 = np.sum((pts - center) ** 2, axis=1)
    return int(np.count_nonzero(d2 <= s * s))


def make_halfspace_geometry(
    grid: PixelGrid, n_directions: int = 180, n_offsets: int = 101
) -> HalfSpaceSet:
    """Directions uniform on the half circle, offsets uniform from the center.

    Offsets span ``[-R, R]`` where ``R`` is half the shortest box side, which
    reproduces the classic 101 x 180 layout on the default grid and keeps the
    sampling of the cylinder uniform.
    """
    if grid.dim != 2:
        raise ValidationError("half-space geometry generation expects a 2-D grid")
    if n_directions < 1 or n_offsets < 2:
        raise ValidationError("need at least 1 direction and 2 offsets")
    angles = np.pi * np.arange(n_directions) / n_directions
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radius = 0.5 * float(np.min(np.asarray(grid.shape) * np.asarray(grid.spacing)))
    offsets = np.linspace(-radius, radius, n_offsets)
    return HalfSpaceSet(directions, offsets, grid.center_point)


def make_ball_geometry(grid: PixelGrid, radii=None, centers=None) -> BallSet:
    """Balls at all pixel centers with radii 4..20 pixel lengths by default."""
    if centers is None:
        centers = grid.centers
    if radii is None:
        spacing = np.asarray(grid.spacing)
        if np.max(spacing) - np.min(spacing) > 1e-9 * np.max(spacing):
            raise ValidationError("default radii need square pixels; pass radii explicitly")
        radii = (4.0 + np.arange(17)) * spacing[0]
    return BallSet(np.asarray(centers, dtype=float), np.asarray(radii, dtype=float))


def measure(cloud, geometry, normalization: str = "per-m") -> MeasurementVector:
    """Count observations in every geometry row.

    Returns raw integer counts or counts divided by m, in the geometry's
    row order.
    """
    pts = _points(cloud)
    m = pts.shape[0]
    if isinstance(geometry, HalfSpaceSet):
        if m and pts.shape[1] != geometry.dim:
            raise ValidationError("cloud and geometry dimensions differ")
        if m == 0:
            counts = np.zeros(geometry.row_count, dtype=np.int64)
        else:
            proj = np.ascontiguousarray((pts - geometry.center) @ geometry.directions.T)
            counts = _kernels.halfspace_counts(proj, geometry.offsets).ravel()
    elif isinstance(geometry, BallSet):
        if m and pts.shape[1] != geometry.dim:
            raise ValidationError("cloud and geometry dimensions differ")
        if m == 0:
            counts = np.zeros(geometry.row_count, dtype=np.int64)
        else:
            counts = _kernels.ball_counts(
                np.ascontiguousarray(pts),
                np.ascontiguousarray(geometry.centers),
                geometry.radii**2,
            ).ravel()
    else:
        raise ValidationError(f"unsupported geometry type {type(geometry).__name__}")
    if normalization == "per-m":
        if m == 0:
            raise ValidationError("per-m normalization needs a nonempty cloud")
        values = counts / m
    elif normalization == "raw-counts":
        values = counts.astype(float)
    else:
        raise ValidationError("normalization must be 'raw-counts' or 'per-m'")
    return MeasurementVector(values, normalization, m)


def _points(cloud) -> np.ndarray:
    pts = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, dtype=float)
    return np.atleast_2d(pts) if pts.size else pts.reshape(pts.shape if pts.ndim == 2 else (0, 0))


def save_geometry(path, geometry) -> None:
    if isinstance(geometry, HalfSpaceSet):
        doc = {
            "kind": "half-space",
            "directions": geometry.directions.tolist(),
            "offsets": geometry.offsets.tolist(),
            "center": geometry.center.tolist(),
        }
    elif isinstance(geometry, BallSet):
        doc = {
            "kind": "ball",
            "centers": geometry.centers.tolist(),
            "radii": geometry.radii.tolist(),
        }
    else:
        raise ValidationError(f"unsupported geometry type {type(geometry).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_geometry(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "half-space":
        return HalfSpaceSet(
            np.asarray(doc["directions"]), np.asarray(doc["offsets"]), np.asarray(doc["center"])
        )
    if kind == "ball":
        return BallSet(np.asarray(doc["centers"]), np.asarray(doc["radii"]))
    raise ValidationError(f"unknown geometry kind {kind!r}")


def save_measurements(path, mv: MeasurementVector) -> None:
    """CSV dump, one ``row_index,value`` line per geometry row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("row_index,value\r\n")
        for j, val in enumerate(mv.values):
            fh.write(f"{j},{format(val, '.17g')}\r\n")


def load_measurements(path, normalization: str, m: int) -> MeasurementVector:
    vals = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.lower().startswith("row_index"):
            fh.seek(0)
        for line in fh:
            line = line.strip()
            if line:
                vals.append(float(line.split(",")[1]))
    return MeasurementVector(np.asarray(vals), normalization, m)
