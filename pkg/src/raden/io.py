"""File formats: density-estimate CSV/PGM dumps and report JSON helpers."""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .errors import ValidationError
from .grid import DensityEstimate, PixelGrid

__all__ = [
    "save_estimate_csv",
    "load_estimate_csv",
    "save_pgm",
    "save_json",
    "load_schema",
]


def save_estimate_csv(path, estimate: DensityEstimate) -> None:
    """2-D grids dump as a value matrix (one row per first-axis index);
    other dimensions dump one value per line in flat row-major order."""
    values = estimate.values
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if estimate.grid.dim == 2:
            img = estimate.image
            for row in img:
                fh.write(",".join(format(x, ".17g") for x in row) + "\r\n")
        else:
            for x in values:
                fh.write(format(x, ".17g") + "\r\n")


def load_estimate_csv(path, grid: PixelGrid) -> DensityEstimate:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    values = np.asarray(rows, dtype=float).ravel()
    if values.shape[0] != grid.num_pixels:
        raise ValidationError("estimate file does not match the grid size")
    return DensityEstimate(grid, values)


def save_pgm(path, estimate: DensityEstimate) -> None:
    """8-bit binary PGM preview, values mapped linearly to 0..255.

    Pixel (ix, iy) lands at column ix, row iy, row 0 at the top.
    """
    grid = estimate.grid
    if grid.dim != 2:
        raise ValidationError("PGM export needs a 2-D grid")
    img = estimate.image  # (nx, ny)
    lo, hi = float(img.min()), float(img.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    bytes_img = np.round((img - lo) * scale).astype(np.uint8)
    raster = bytes_img.T  # rows = y axis
    with open(path, "wb") as fh:
        fh.write(f"P5\n{raster.shape[1]} {raster.shape[0]}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


def save_json(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_schema(name: str) -> dict:
    """One of the shipped report schemas (e.g. ``solve_report``)."""
    ref = resources.files("raden.schemas").joinpath(f"{name}.schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))
