"""Pixel grids and density estimates living on them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ValidationError

__all__ = ["PixelGrid", "DensityEstimate"]


@dataclass(frozen=True)
class PixelGrid:
    """Uniform pixel grid in 1, 2 or 3 dimensions.

    ``origin`` is the low corner of the covered box, ``spacing`` the pixel
    edge length per axis and ``shape`` the pixel count per axis. Pixel ``i``
    (row-major flat index) has center ``origin + (multi_index + 0.5) * spacing``.
    """

    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        origin = tuple(float(x) for x in self.origin)
        spacing = tuple(float(x) for x in self.spacing)
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "shape", shape)
        if not (len(origin) == len(spacing) == len(shape)):
            raise ValidationError("origin, spacing and shape must have equal length")
        if self.dim not in (1, 2, 3):
            raise ValidationError(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        if any(h <= 0 for h in spacing):
            raise ValidationError("spacing must be strictly positive on every axis")
        if any(n < 1 for n in shape):
            raise ValidationError("shape must be at least 1 on every axis")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def num_pixels(self) -> int:
        return int(np.prod(self.shape))

    @property
    def pixel_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def box_lo(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=float)

    @property
    def box_hi(self) -> np.ndarray:
        return self.box_lo + np.asarray(self.shape) * np.asarray(self.spacing)

    @property
    def center_point(self) -> np.ndarray:
        return 0.5 * (self.box_lo + self.box_hi)

    def axis_centers(self, axis: int) -> np.ndarray:
        """Pixel center coordinates along one axis."""
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.spacing[axis]

    @cached_property
    def centers(self) -> np.ndarray:
        """All pixel centers, shape (num_pixels, dim), row-major order."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def flat_index(self, point) -> int:
        """Flat index of the pixel containing ``point`` (clipped to the grid)."""
        p = np.asarray(point, dtype=float)
        if p.shape != (self.dim,):
            raise ValidationError("point dimension does not match grid")
        idx = np.floor((p - self.box_lo) / np.asarray(self.spacing)).astype(int)
        idx = np.clip(idx, 0, np.asarray(self.shape) - 1)
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    @classmethod
    def cover_box(cls, lo, hi, shape) -> "PixelGrid":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        shape = tuple(int(n) for n in np.atleast_1d(shape))
        if np.any(hi <= lo):
            raise ValidationError("box high corner must exceed low corner")
        spacing = (hi - lo) / np.asarray(shape)
        return cls(tuple(lo), tuple(spacing), shape)

    @classmethod
    def default_2d(cls, n: int = 100, side: float = 100.0) -> "PixelGrid":
        """The standard unit-spacing square grid used by the 2-D experiments."""
        return cls.cover_box((0.0, 0.0), (side, side), (n, n))


@dataclass(frozen=True)
class DensityEstimate:
    """Nonnegative pixel densities integrating to one over the grid box."""

    grid: PixelGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.num_pixels,):
            raise ValidationError("values length must equal the grid pixel count")

    @property
    def image(self) -> np.ndarray:
        """Values reshaped to the grid shape."""
        return self.values.reshape(self.grid.shape)

    def value_at(self, point) -> float:
        """Density value of the pixel containing ``point``."""
        return float(self.values[self.grid.flat_index(point)])
