"""Benchmark the compiled kernel backend against the numpy fallback.

Run as ``python benchmarks/bench_kernels.py``; sizes default to the standard
100x100 experiment scale. Each kernel is checked for agreement between
backends before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from raden._kernels import available_backends, get_backend
from raden.grid import PixelGrid
from raden.projection import make_ball_geometry, make_halfspace_geometry


def _time(fn, repeats):
    fn()  # warm-up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=100, help="pixels per axis")
    ap.add_argument("--m", type=int, default=2000, help="cloud size for counting")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    if len(backends) < 2:
        print("compiled backend unavailable; nothing to compare")

    grid = PixelGrid.cover_box((0, 0), (args.grid, args.grid), (args.grid, args.grid))
    hs = make_halfspace_geometry(grid)
    balls = make_ball_geometry(grid)
    rng = np.random.default_rng(0)
    points = rng.uniform(0, args.grid, size=(args.m, 2))
    proj = np.ascontiguousarray((points - hs.center) @ hs.directions.T)
    pixels = np.ascontiguousarray(grid.centers)
    centers = np.ascontiguousarray(balls.centers)
    radii2 = balls.radii**2

    impls = {name: get_backend(name) for name in backends}
    ref = impls[backends[0]]

    print(f"grid {args.grid}x{args.grid}, m={args.m}, "
          f"{hs.row_count} half-space rows, {balls.row_count} ball rows")
    print(f"{'kernel':<18}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")

    indptr, indices = ref.ball_pattern(pixels, centers, radii2)
    v = rng.random(grid.num_pixels)
    u = rng.random(balls.row_count)

    cases = {
        "halfspace_counts": lambda impl: impl.halfspace_counts(proj, hs.offsets),
        "ball_counts": lambda impl: impl.ball_counts(points, centers, radii2),
        "ball_pattern": lambda impl: impl.ball_pattern(pixels, centers, radii2),
        "pattern_matvec": lambda impl: impl.pattern_matvec(indptr, indices, v),
        "pattern_rmatvec": lambda impl: impl.pattern_rmatvec(
            indptr, indices, u, grid.num_pixels
        ),
    }

    for name, call in cases.items():
        outs = {b: call(impls[b]) for b in backends}
        base = outs[backends[0]]
        for b in backends[1:]:
            got = outs[b]
            if name == "ball_pattern":
                ok = np.array_equal(base[0], got[0]) and all(
                    np.array_equal(np.sort(base[1][s:e]), np.sort(got[1][s:e]))
                    for s, e in zip(base[0][:-1], base[0][1:])
                )
            elif name.startswith("pattern_"):
                ok = np.allclose(base, got, rtol=1e-12, atol=1e-12)
            else:
                ok = np.array_equal(base, got)
            if not ok:
                raise SystemExit(f"backend mismatch in {name}")
        times = {b: _time(lambda b=b: call(impls[b]), args.repeats) for b in backends}
        row = f"{name:<18}" + "".join(f"{times[b]*1000:>10.1f}ms" for b in backends)
        if len(backends) == 2:
            row += f"{times[backends[0]] / times[backends[1]]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
