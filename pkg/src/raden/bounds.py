"""Closed-form error bounds and the Monte-Carlo experiments that verify them.

The bound formulas invert the DKW tail and combine it with a union bound
over projection directions or ball centers; the coverage experiment checks
the resulting simultaneous confidence statement empirically on densities
whose projected CDFs have closed forms (axis-aligned uniform boxes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedSpecError, ValidationError
from .pointcloud import DensitySpec, UniformComponent, relative_error, sample_density

__all__ = [
    "dkw_epsilon",
    "halfspace_l2_bound",
    "spherical_l2_bound",
    "reconstruction_bound",
    "sphere_surface_area",
    "projected_uniform_cdf",
    "coverage_experiment",
    "rate_experiment",
    "CoverageReport",
    "RateReport",
]


def _check(m=None, K=None, p=None, n=None):
    if m is not None and (int(m) != m or m < 1):
        raise ValidationError("m must be a positive integer")
    if K is not None and (int(K) != K or K < 1):
        raise ValidationError("K must be a positive integer")
    if p is not None and not (0 < p < 1):
        raise ValidationError("p must lie in (0, 1)")
    if n is not None and (int(n) != n or n < 1):
        raise ValidationError("n must be a positive integer")


def dkw_epsilon(m: int, p: float) -> float:
    """Sup-norm radius such that the empirical CDF of m draws stays within
    it with probability at least 1-p: ``sqrt(log(2/p) / (2m))``."""
    _check(m=m, p=p)
    return math.sqrt(math.log(2.0 / p) / (2.0 * m))


def sphere_surface_area(n: int) -> float:
    """Surface area of the unit sphere in R^n (2pi for n=2, 4pi for n=3)."""
    _check(n=n)
    if n > 10:
        raise ValidationError("surface areas provided for n <= 10 only")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def halfspace_l2_bound(m: int, K: int, p: float, n: int) -> float:
    """High-probability squared-L2 bound for the half-space approximation
    over K directions uniformly spread on the sphere.

    Returns only the computable sampling term; the direction-quadrature
    remainder depends on the unknown projections and is by design driven to
    zero by taking K large.
    """
    _check(m=m, K=K, p=p, n=n)
    return sphere_surface_area(n) * math.log(2.0 * K / p) / m


def spherical_l2_bound(m: int, K: int, p: float) -> float:
    """High-probability mean squared-L2 bound over any K ball centers:
    ``(log K + log(2/p)) / m``."""
    _check(m=m, K=K, p=p)
    return (math.log(K) + math.log(2.0 / p)) / m


def reconstruction_bound(m: int, K: int, p: float, n: int, c: float, rho: float) -> float:
    """Worst-case reconstruction bound from half-space data, for documentation.

    ``c`` is the non-constructive stability constant and ``rho`` the H^{1/2}
    norm bound of the density; both must be supplied by the caller, so the
    value is illustrative, never asserted in tests.
    """
    _check(m=m, K=K, p=p, n=n)
    base = halfspace_l2_bound(m, K, p, n)
    expo = 1.0 / (2.0 * (n + 2.0))
    return c * base**expo * rho ** (1.0 - 2.0 * expo)


# -- coverage experiment ------------------------------------------------------


def projected_uniform_cdf(lo, hi, theta, s):
    """CDF of ``theta . X`` for X uniform on the axis-aligned box [lo, hi].

    The projection is a sum of independent scaled uniforms; in 2-D that is
    the trapezoidal distribution, handled here in closed form.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if lo.shape != hi.shape or lo.shape != theta.shape or lo.shape[0] != 2:
        raise UnsupportedSpecError("analytic projected CDFs implemented for 2-D boxes")
    ends = np.stack([theta * lo, theta * hi])
    a = ends.min(axis=0)
    widths = np.abs(ends[1] - ends[0])
    start = a.sum()
    w1, w2 = sorted(widths, reverse=True)
    s = np.asarray(s, dtype=float)
    t = s - start
    total = w1 + w2
    if w1 == 0:  # degenerate box projection: point mass
        return (t >= 0).astype(float)
    if w2 == 0:  # one axis orthogonal to theta: plain uniform
        return np.clip(t / w1, 0.0, 1.0)
    out = np.zeros_like(t)
    rising = (t > 0) & (t < w2)
    out[rising] = t[rising] ** 2 / (2 * w1 * w2)
    flat = (t >= w2) & (t <= w1)
    out[flat] = (t[flat] - w2 / 2) / w1
    falling = (t > w1) & (t < total)
    out[falling] = 1.0 - (total - t[falling]) ** 2 / (2 * w1 * w2)
    out[t >= total] = 1.0
    return out


def _single_uniform(spec: DensitySpec):
    if len(spec.components) != 1 or not isinstance(spec.components[0], UniformComponent):
        raise UnsupportedSpecError(
            "coverage_experiment needs a single axis-aligned uniform component"
        )
    comp = spec.components[0]
    if np.any(comp.lo < np.asarray(spec.box_lo)) or np.any(comp.hi > np.asarray(spec.box_hi)):
        raise UnsupportedSpecError("the uniform support must lie inside the domain box")
    return comp


def _ecdf_sup_distance(samples: np.ndarray, cdf_vals_sorted: np.ndarray) -> float:
    """Kolmogorov-Smirnov statistic given F evaluated at the sorted samples."""
    m = samples.shape[0]
    i = np.arange(1, m + 1)
    return float(np.max(np.maximum(i / m - cdf_vals_sorted, cdf_vals_sorted - (i - 1) / m)))


@dataclass
class CoverageReport:
    trials: int
    m: int
    p: float
    directions: int
    epsilon: float
    sup_errors: list
    violations: int

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.trials if self.trials else 0.0

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "m": self.m,
            "p": self.p,
            "directions": self.directions,
            "epsilon": self.epsilon,
            "sup_errors": list(map(float, self.sup_errors)),
            "violations": self.violations,
            "violation_fraction": self.violation_fraction,
        }


def coverage_experiment(
    spec: DensitySpec, m: int, p: float, trials: int, seed: int, n_directions: int = 8
) -> CoverageReport:
    """Simultaneous DKW coverage over a fan of directions.

    Per trial: draw m samples, compute the worst sup-norm ECDF error across
    the directions against the analytic projected CDFs, and compare to the
    union-bound radius ``dkw_epsilon(m, p / K)``. The theorem promises a
    violation fraction of at most p.
    """
    _check(m=m, p=p)
    if trials < 0:
        raise ValidationError("trials must be nonnegative")
    comp = _single_uniform(spec)
    angles = np.pi * np.arange(n_directions) / n_directions
    thetas = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    eps = dkw_epsilon(m, p / n_directions)
    sups = []
    violations = 0
    from .rng import substream

    for trial in range(trials):
        pts = sample_density(spec, m, seed=int(substream(seed, trial).integers(2**31))).points
        worst = 0.0
        for theta in thetas:
            proj = np.sort(pts @ theta)
            F = projected_uniform_cdf(comp.lo, comp.hi, theta, proj)
            worst = max(worst, _ecdf_sup_distance(proj, F))
        sups.append(worst)
        violations += worst >= eps
    return CoverageReport(trials, m, p, n_directions, eps, sups, int(violations))


# -- convergence-rate experiment ----------------------------------------------


@dataclass
class RateReport:
    m_list: list
    mean_eps: list
    std_eps: list
    slope: float
    intercept: float
    fit_residual: float
    raw: dict

    def to_json(self) -> dict:
        return {
            "m_list": list(map(int, self.m_list)),
            "mean_eps": list(map(float, self.mean_eps)),
            "std_eps": list(map(float, self.std_eps)),
            "slope": float(self.slope),
            "intercept": float(self.intercept),
            "fit_residual": float(self.fit_residual),
            "raw": {str(k): list(map(float, v)) for k, v in self.raw.items()},
        }


def rate_experiment(spec: DensitySpec, m_list, run_trial, trials: int, seed: int) -> RateReport:
    """Fit the slope of log mean-error against log sample count.

    ``run_trial(spec, m, seed) -> eps`` runs the full reconstruction
    pipeline; this function only orchestrates trials and the least-squares
    fit. The theoretical worst-case exponent is an upper bound, so no slope
    magnitude is asserted anywhere, only reported.
    """
    m_list = [int(m) for m in m_list]
    if len(m_list) < 4:
        raise ValidationError("rate fits need at least 4 sample sizes")
    from .rng import substream

    raw = {}
    for mi, m in enumerate(m_list):
        raw[m] = [
            run_trial(spec, m, int(substream(seed, mi, t).integers(2**31)))
            for t in range(trials)
        ]
    means = np.array([np.mean(raw[m]) for m in m_list])
    stds = np.array([np.std(raw[m]) for m in m_list])
    x = np.log(np.asarray(m_list, dtype=float))
    y = np.log(means)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return RateReport(m_list, means.tolist(), stds.tolist(), float(slope), float(intercept), resid, raw)
