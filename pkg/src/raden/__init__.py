"""Nonparametric density estimation by discretized Radon transform inversion.

Counts observations in half spaces or balls to approximate generalized Radon
projections of an unknown density, assembles the discretized projection
operator over a pixel grid, and inverts with TV- or Tikhonov-regularized
least squares plus automated regularization-parameter selection. A local-PCA
extension reconstructs densities on low-dimensional embedded manifolds.
"""

from ._kernels import BACKEND as kernel_backend
from .grid import DensityEstimate, PixelGrid
from .pointcloud import (
    DensitySpec,
    PointCloud,
    eval_density,
    load_builtin_spec,
    relative_error,
    sample_density,
)
from .projection import (
    BallSet,
    HalfSpaceSet,
    MeasurementVector,
    count_ball,
    count_half_space,
    make_ball_geometry,
    make_halfspace_geometry,
    measure,
)
from .operator import IdentityOperator, LinearOperator, RadonOperator, assemble
from .solver import RegConfig, SolveReport, gcv_value, normalize, solve
from .baselines import FbpConfig, KdeConfig, fbp_reconstruct, kde, os_estimate, sinc_projection
from .manifold import PatchConfig, embed_paraboloid, patch_density, pca_patch, tangent_bound_check
from .bounds import (
    coverage_experiment,
    dkw_epsilon,
    halfspace_l2_bound,
    rate_experiment,
    spherical_l2_bound,
)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "PixelGrid",
    "DensityEstimate",
    "PointCloud",
    "DensitySpec",
    "sample_density",
    "eval_density",
    "relative_error",
    "load_builtin_spec",
    "HalfSpaceSet",
    "BallSet",
    "MeasurementVector",
    "count_half_space",
    "count_ball",
    "make_halfspace_geometry",
    "make_ball_geometry",
    "measure",
    "LinearOperator",
    "IdentityOperator",
    "RadonOperator",
    "assemble",
    "RegConfig",
    "SolveReport",
    "solve",
    "gcv_value",
    "normalize",
    "KdeConfig",
    "FbpConfig",
    "kde",
    "sinc_projection",
    "fbp_reconstruct",
    "os_estimate",
    "PatchConfig",
    "embed_paraboloid",
    "pca_patch",
    "patch_density",
    "tangent_bound_check",
    "dkw_epsilon",
    "halfspace_l2_bound",
    "spherical_l2_bound",
    "coverage_experiment",
    "rate_experiment",
    "__version__",
]
