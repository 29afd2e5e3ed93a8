"""Command line interface: ``raden <command> [flags]``.

Validation failures exit nonzero with a machine-readable JSON error record
on stderr; numerical non-convergence is flagged in the report but exits
zero so batch sweeps survive hard instances.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import bounds as bounds_mod
from . import io as io_mod
from .errors import RadenError
from .experiments import (
    rate_reg_config,
    rate_trial_runner,
    reconstruct_cloud,
    run_patch_table,
    run_table,
    table_reg_config,
)
from .grid import PixelGrid
from .pointcloud import (
    eval_density,
    load_builtin_spec,
    load_point_cloud,
    load_spec,
    relative_error,
    sample_density,
    save_point_cloud,
)
from .solver import RegConfig


def _fail(exc: BaseException, code: int = 2):
    record = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(record), err=True)
    sys.exit(code)


def _load_any_spec(path_or_name: str):
    if path_or_name.startswith("builtin:"):
        return load_builtin_spec(path_or_name.split(":", 1)[1])
    return load_spec(path_or_name)


def _parse_grid(grid_shape, grid_origin, grid_spacing) -> PixelGrid:
    shape = tuple(int(x) for x in grid_shape.split(","))
    origin = tuple(float(x) for x in grid_origin.split(","))
    spacing = tuple(float(x) for x in grid_spacing.split(","))
    return PixelGrid(origin, spacing, shape)


@click.group()
def main():
    """Density estimation by discretized Radon transform inversion."""


@main.command("sample")
@click.option("--spec", "spec_path", required=True,
              help="Density spec JSON path, or builtin:density1 .. builtin:density4.")
@click.option("-m", "--num-samples", "m", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("-o", "--out", "out_path", required=True, help="Output point-cloud CSV.")
def cmd_sample(spec_path, m, seed, out_path):
    """Draw IID samples from a density spec into a CSV point cloud."""
    try:
        spec = _load_any_spec(spec_path)
        cloud = sample_density(spec, m, seed)
        save_point_cloud(out_path, cloud)
    except (RadenError, OSError, json.JSONDecodeError) as exc:
        _fail(exc)
    click.echo(f"wrote {cloud.m} points to {out_path}")


@main.command("reconstruct")
@click.option("--cloud", "cloud_path", required=True, help="Point-cloud CSV.")
@click.option("--transform", type=click.Choice(["sph", "hs"]), default="sph", show_default=True)
@click.option("--penalty", type=click.Choice(["tv", "tikhonov"]), default="tv", show_default=True)
@click.option("--selection", type=click.Choice(["gcv", "fixed"]), default="gcv", show_default=True)
@click.option("--fixed-lambda", type=float, default=None, help="Lambda when --selection fixed.")
@click.option("--grid-shape", default="100,100", show_default=True)
@click.option("--grid-origin", default="0,0", show_default=True)
@click.option("--grid-spacing", default="1,1", show_default=True)
@click.option("--truth", "truth_path", default=None,
              help="Density spec for the epsilon report (path or builtin:name).")
@click.option("--table-config/--default-config", default=True, show_default=True,
              help="Use the tuned table solve settings or plain RegConfig defaults.")
@click.option("-o", "--out-prefix", "prefix", required=True)
def cmd_reconstruct(cloud_path, transform, penalty, selection, fixed_lambda,
                    grid_shape, grid_origin, grid_spacing, truth_path, table_config, prefix):
    """Full inverse-transform pipeline: measure, solve, write CSV/PGM/JSON."""
    try:
        grid = _parse_grid(grid_shape, grid_origin, grid_spacing)
        cloud = load_point_cloud(cloud_path, dim=grid.dim)
        cfg = table_reg_config() if table_config else RegConfig()
        cfg.penalty = "tv-anisotropic" if penalty == "tv" else "tikhonov"
        cfg.selection = selection
        if selection == "fixed":
            cfg.fixed_lambda = fixed_lambda
            cfg.__post_init__()
        truth = None
        if truth_path:
            truth = eval_density(_load_any_spec(truth_path), grid).values
        estimate, report = reconstruct_cloud(cloud, grid, transform, cfg, truth=truth)
    except (RadenError, OSError, json.JSONDecodeError) as exc:
        _fail(exc)
    io_mod.save_estimate_csv(f"{prefix}.csv", estimate)
    if grid.dim == 2:
        io_mod.save_pgm(f"{prefix}.pgm", estimate)
    io_mod.save_json(f"{prefix}.report.json", report.to_json())
    msg = f"chosen lambda {report.chosen_lambda:.6g}; converged={report.converged}"
    if report.epsilon is not None:
        msg += f"; epsilon={report.epsilon:.4f}"
    click.echo(msg)


@main.command("table")
@click.option("--id", "table_id", type=click.Choice(["T1", "T2", "patch"]), required=True)
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("-m", "--num-samples", "m", type=int, default=None,
              help="Samples per trial (default 1000 for T1/T2, 5000 for patch).")
@click.option("--seed", type=int, required=True)
@click.option("--methods", default="sph,hs,kde,fbp", show_default=True)
@click.option("--workers", type=int, default=None, help="Trial parallelism (default: RADEN_THREADS or CPUs).")
@click.option("-o", "--out", "out_path", required=True)
def cmd_table(table_id, trials, m, seed, methods, workers, out_path):
    """Reproduce one of the experiment tables as JSON."""
    try:
        if table_id == "patch":
            doc = run_patch_table(trials=trials, m=m or 5000, seed=seed, workers=workers)
        else:
            doc = run_table(table_id, trials=trials, m=m or 1000, seed=seed,
                            methods=tuple(methods.split(",")), workers=workers)
        io_mod.save_json(out_path, doc)
    except (RadenError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {out_path}")
    if table_id != "patch":
        for meth, stats in doc["methods"].items():
            if stats["mean"] is not None:
                click.echo(f"  {meth}: mean={stats['mean']:.4f} std={stats['std']:.4f}")


@main.command("rate")
@click.option("--spec", "spec_path", default="builtin:density2", show_default=True)
@click.option("--m-list", default="100,500,1000,2000,5000", show_default=True)
@click.option("--trials", type=int, default=5, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--transform", type=click.Choice(["sph", "hs"]), default="sph", show_default=True)
@click.option("-o", "--out", "out_path", required=True)
def cmd_rate(spec_path, m_list, trials, seed, transform, out_path):
    """Fit the error-vs-sample-count slope over full pipeline runs."""
    try:
        spec = _load_any_spec(spec_path)
        runner = rate_trial_runner(transform=transform, reg_cfg=rate_reg_config())
        report = bounds_mod.rate_experiment(
            spec, [int(x) for x in m_list.split(",")], runner, trials, seed
        )
        io_mod.save_json(out_path, report.to_json())
    except (RadenError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"slope={report.slope:.4f} (residual {report.fit_residual:.3g}); wrote {out_path}")


@main.command("bounds")
@click.option("--kind", type=click.Choice(["dkw", "hs", "sph"]), required=True)
@click.option("-m", "--num-samples", "m", type=int, required=True)
@click.option("-p", "--probability", "p", type=float, required=True)
@click.option("-k", "--projections", "K", type=int, default=None,
              help="Projection/center count (hs and sph).")
@click.option("-n", "--dimension", "n", type=int, default=2, show_default=True)
@click.option("-o", "--out", "out_path", default=None, help="Optional JSON output path.")
def cmd_bounds(kind, m, p, K, n, out_path):
    """Evaluate one of the closed-form error bounds."""
    try:
        if kind == "dkw":
            value = bounds_mod.dkw_epsilon(m, p)
        elif kind == "hs":
            if K is None:
                raise RadenError("hs bound needs --projections")
            value = bounds_mod.halfspace_l2_bound(m, K, p, n)
        else:
            if K is None:
                raise RadenError("sph bound needs --projections")
            value = bounds_mod.spherical_l2_bound(m, K, p)
    except RadenError as exc:
        _fail(exc)
    click.echo(f"{value:.6g}")
    if out_path:
        io_mod.save_json(out_path, {"kind": kind, "m": m, "p": p, "K": K, "n": n, "value": value})


@main.command("coverage")
@click.option("--spec", "spec_path", required=True, help="Single-uniform spec (path or builtin:name).")
@click.option("-m", "--num-samples", "m", type=int, default=1000, show_default=True)
@click.option("-p", "--probability", "p", type=float, default=0.05, show_default=True)
@click.option("--trials", type=int, default=200, show_default=True)
@click.option("--directions", type=int, default=8, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("-o", "--out", "out_path", required=True)
def cmd_coverage(spec_path, m, p, trials, directions, seed, out_path):
    """Monte-Carlo check of the simultaneous DKW coverage bound."""
    try:
        spec = _load_any_spec(spec_path)
        report = bounds_mod.coverage_experiment(spec, m, p, trials, seed, directions)
        io_mod.save_json(out_path, report.to_json())
    except (RadenError, OSError, json.JSONDecodeError) as exc:
        _fail(exc)
    click.echo(
        f"violations {report.violations}/{report.trials} "
        f"(fraction {report.violation_fraction:.3f}, radius {report.epsilon:.4f})"
    )


if __name__ == "__main__":
    main()
