"""Synthetic density specs, IID sampling and ground-truth grid evaluation.

A :class:`DensitySpec` is a weighted mixture of simple components truncated
to a rectangular domain box. Sampling rejects draws outside the box and the
grid ground truth is the correspondingly renormalized density, so estimates
and truth stay comparable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DegenerateInputError, DegenerateSpecError, ValidationError
from .grid import PixelGrid
from .rng import substream

__all__ = [
    "PointCloud",
    "DensitySpec",
    "GroundTruthGrid",
    "sample_density",
    "eval_density",
    "relative_error",
    "random_gaussian_mixture",
    "load_spec",
    "load_builtin_spec",
    "save_point_cloud",
    "load_point_cloud",
]

_REJECTION_ROUNDS = 500


@dataclass(frozen=True)
class PointCloud:
    """m sample points in R^n."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValidationError("points must be a 2-D array (m, dim)")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def m(self) -> int:
        return self.points.shape[0]


class _Component:
    kind = ""

    def pdf(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def intersects_box(self, lo: np.ndarray, hi: np.ndarray) -> bool:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


class GaussianComponent(_Component):
    kind = "isotropic-gaussian"

    def __init__(self, mean, sigma):
        self.mean = np.asarray(mean, dtype=float)
        self.sigma = float(sigma)
        if self.sigma <= 0:
            raise ValidationError("gaussian sigma must be positive")

    def pdf(self, pts):
        n = pts.shape[1]
        d2 = np.sum((pts - self.mean) ** 2, axis=1)
        norm = (2.0 * math.pi * self.sigma**2) ** (n / 2.0)
        return np.exp(-0.5 * d2 / self.sigma**2) / norm

    def sample(self, rng, count):
        return rng.normal(self.mean, self.sigma, size=(count, self.mean.shape[0]))

    def intersects_box(self, lo, hi):
        return True  # unbounded support

    def to_json(self):
        return {"kind": self.kind, "mean": self.mean.tolist(), "sigma": self.sigma}


class UniformComponent(_Component):
    kind = "axis-aligned-uniform"

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if np.any(self.hi <= self.lo):
            raise ValidationError("uniform component needs hi > lo on every axis")

    def pdf(self, pts):
        inside = np.all((pts >= self.lo) & (pts <= self.hi), axis=1)
        return inside / np.prod(self.hi - self.lo)

    def sample(self, rng, count):
        return rng.uniform(self.lo, self.hi, size=(count, self.lo.shape[0]))

    def intersects_box(self, lo, hi):
        return bool(np.all(self.lo < hi) and np.all(self.hi > lo))

    def to_json(self):
        return {"kind": self.kind, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class ExponentialComponent(_Component):
    """Product of per-axis exponentials starting at ``origin``."""

    kind = "exponential"

    def __init__(self, rate, origin):
        self.rate = float(rate)
        self.origin = np.asarray(origin, dtype=float)
        if self.rate <= 0:
            raise ValidationError("exponential rate must be positive")

    def pdf(self, pts):
        t = pts - self.origin
        inside = np.all(t >= 0, axis=1)
        vals = self.rate ** pts.shape[1] * np.exp(-self.rate * np.sum(np.clip(t, 0, None), axis=1))
        return np.where(inside, vals, 0.0)

    def sample(self, rng, count):
        n = self.origin.shape[0]
        return self.origin + rng.exponential(1.0 / self.rate, size=(count, n))

    def intersects_box(self, lo, hi):
        return bool(np.all(self.origin < hi))

    def to_json(self):
        return {"kind": self.kind, "rate": self.rate, "origin": self.origin.tolist()}


class GammaComponent(_Component):
    """Product of per-axis gamma densities starting at ``origin``."""

    kind = "gamma"

    def __init__(self, shape, scale, origin):
        self.shape = float(shape)
        self.scale = float(scale)
        self.origin = np.asarray(origin, dtype=float)
        if self.shape <= 0 or self.scale <= 0:
            raise ValidationError("gamma shape and scale must be positive")

    def pdf(self, pts):
        t = pts - self.origin
        inside = np.all(t > 0, axis=1)
        t = np.clip(t, 1e-300, None)
        k, th = self.shape, self.scale
        log_axis = (k - 1) * np.log(t) - t / th - math.lgamma(k) - k * math.log(th)
        return np.where(inside, np.exp(np.sum(log_axis, axis=1)), 0.0)

    def sample(self, rng, count):
        n = self.origin.shape[0]
        return self.origin + rng.gamma(self.shape, self.scale, size=(count, n))

    def intersects_box(self, lo, hi):
        return bool(np.all(self.origin < hi))

    def to_json(self):
        return {
            "kind": self.kind,
            "shape": self.shape,
            "scale": self.scale,
            "origin": self.origin.tolist(),
        }


_COMPONENT_KINDS = {
    "isotropic-gaussian": lambda d: GaussianComponent(d["mean"], d["sigma"]),
    "axis-aligned-uniform": lambda d: UniformComponent(d["lo"], d["hi"]),
    "exponential": lambda d: ExponentialComponent(d["rate"], d["origin"]),
    "gamma": lambda d: GammaComponent(d["shape"], d["scale"], d["origin"]),
}


@dataclass(frozen=True)
class DensitySpec:
    """Weighted mixture truncated to the domain box ``[box_lo, box_hi]``."""

    dim: int
    box_lo: tuple
    box_hi: tuple
    weights: tuple
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "box_lo", tuple(float(x) for x in self.box_lo))
        object.__setattr__(self, "box_hi", tuple(float(x) for x in self.box_hi))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.box_lo) != self.dim or len(self.box_hi) != self.dim:
            raise ValidationError("box corners must match the spec dimension")
        if len(self.weights) != len(self.components) or not self.components:
            raise ValidationError("need one weight per component, at least one component")
        if any(w <= 0 for w in self.weights):
            raise ValidationError("weights must be strictly positive")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValidationError("weights must sum to 1 within 1e-12")
        lo, hi = np.asarray(self.box_lo), np.asarray(self.box_hi)
        if np.any(hi <= lo):
            raise ValidationError("domain box must have positive extent")
        for c in self.components:
            if not c.intersects_box(lo, hi):
                raise ValidationError(f"{c.kind} component does not meet the domain box")

    def pdf(self, pts: np.ndarray) -> np.ndarray:
        """Untruncated mixture density at ``pts`` (shape (k, dim))."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[0])
        for w, c in zip(self.weights, self.components):
            out += w * c.pdf(pts)
        return out

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "box": {"lo": list(self.box_lo), "hi": list(self.box_hi)},
            "components": [
                dict(weight=w, **c.to_json()) for w, c in zip(self.weights, self.components)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DensitySpec":
        try:
            comps = []
            weights = []
            for c in doc["components"]:
                kind = c["kind"]
                if kind not in _COMPONENT_KINDS:
                    raise ValidationError(f"unknown component kind {kind!r}")
                comps.append(_COMPONENT_KINDS[kind](c))
                weights.append(c["weight"])
            return cls(
                dim=int(doc["dim"]),
                box_lo=tuple(doc["box"]["lo"]),
                box_hi=tuple(doc["box"]["hi"]),
                weights=tuple(weights),
                components=tuple(comps),
            )
        except KeyError as exc:
            raise ValidationError(f"density spec is missing field {exc}") from exc


@dataclass(frozen=True)
class GroundTruthGrid:
    """Spec density evaluated at pixel centers, unit mass over the grid box."""

    grid: PixelGrid
    values: np.ndarray


def sample_density(spec: DensitySpec, m: int, seed: int) -> PointCloud:
    """Draw ``m`` IID samples from the truncated mixture.

    A component index is drawn by weight, then a point from that component;
    draws landing outside the domain box are fully redrawn. Deterministic
    for a fixed seed.
    """
    if m < 0:
        raise ValidationError("sample count must be nonnegative")
    rng = substream(seed)
    lo = np.asarray(spec.box_lo)
    hi = np.asarray(spec.box_hi)
    out = np.empty((m, spec.dim))
    filled = 0
    weights = np.asarray(spec.weights)
    for _ in range(_REJECTION_ROUNDS):
        if filled == m:
            break
        want = m - filled
        comp_idx = rng.choice(len(spec.components), size=want, p=weights)
        batch = np.empty((want, spec.dim))
        for ci in range(len(spec.components)):
            mask = comp_idx == ci
            if np.any(mask):
                batch[mask] = spec.components[ci].sample(rng, int(mask.sum()))
        keep = batch[np.all((batch >= lo) & (batch <= hi), axis=1)]
        take = min(keep.shape[0], want)
        out[filled : filled + take] = keep[:take]
        filled += take
    if filled < m:
        raise DegenerateSpecError(
            f"rejection sampling stalled after {_REJECTION_ROUNDS} rounds "
            f"({filled}/{m} accepted); the spec has almost no mass in the box"
        )
    return PointCloud(out)


def eval_density(spec: DensitySpec, grid: PixelGrid) -> GroundTruthGrid:
    """Spec pdf at pixel centers, renormalized to unit mass over the grid box."""
    if grid.dim != spec.dim:
        raise ValidationError("grid dimension does not match spec dimension")
    raw = spec.pdf(grid.centers)
    mass = raw.sum() * grid.pixel_volume
    if mass <= 0:
        raise DegenerateInputError("spec has no mass on the grid")
    return GroundTruthGrid(grid, raw / mass)


def relative_error(v: np.ndarray, v_m: np.ndarray) -> float:
    """``|v - v_m|_2 / |v|_2``, the error measure used in all experiments."""
    v = np.asarray(v, dtype=float).ravel()
    v_m = np.asarray(v_m, dtype=float).ravel()
    if v.shape != v_m.shape:
        raise ValidationError("vectors must have equal length")
    denom = np.linalg.norm(v)
    if denom == 0:
        raise DegenerateInputError("reference vector has zero norm")
    return float(np.linalg.norm(v - v_m) / denom)


def random_gaussian_mixture(
    rng: np.random.Generator,
    n_components: int = 100,
    sigma: float = 3.0,
    box_lo=(0.0, 0.0),
    box_hi=(100.0, 100.0),
) -> DensitySpec:
    """Equal-weight isotropic Gaussian mixture with means uniform in the box."""
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    means = rng.uniform(lo, hi, size=(n_components, lo.shape[0]))
    comps = tuple(GaussianComponent(mu, sigma) for mu in means)
    w = tuple(np.full(n_components, 1.0 / n_components))
    return DensitySpec(lo.shape[0], tuple(lo), tuple(hi), w, comps)


def load_spec(path) -> DensitySpec:
    with open(path, "r", encoding="utf-8") as fh:
        return DensitySpec.from_json(json.load(fh))


def load_builtin_spec(name: str) -> DensitySpec:
    """One of the four shipped densities: ``density1`` .. ``density4``."""
    ref = resources.files("raden.specs").joinpath(f"{name}.json")
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValidationError(f"unknown builtin spec {name!r}") from None
    return DensitySpec.from_json(json.loads(text))


def save_point_cloud(path, cloud: PointCloud) -> None:
    """One point per row, ``dim`` comma-separated columns, no header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in cloud.points:
            fh.write(",".join(format(x, ".17g") for x in row) + "\r\n")


def load_point_cloud(path, dim: int | None = None) -> PointCloud:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        if dim is None:
            raise ValidationError("empty point cloud file needs an explicit dim")
        return PointCloud(np.empty((0, dim)))
    pts = np.asarray(rows, dtype=float)
    if dim is not None and pts.shape[1] != dim:
        raise ValidationError(f"expected {dim} columns, found {pts.shape[1]}")
    return PointCloud(pts)
