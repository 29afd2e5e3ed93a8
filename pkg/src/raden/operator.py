"""Discretized Radon operators over pixel grids.

Membership is tested at pixel centers with closed inequalities, giving a
binary matrix scaled by a uniform weight ``w``. Storage is either an
explicit row-compressed binary pattern or a matrix-free apply/adjoint pair:
cumulative sums over projection-sorted pixels for half spaces, cached FFT
disk-stencil convolutions for ball geometries whose centers sit on the
pixel lattice.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np
from scipy import fft as sfft

from . import _kernels
from .errors import CapacityError, ValidationError
from .grid import PixelGrid
from .projection import BallSet, HalfSpaceSet

__all__ = [
    "LinearOperator",
    "IdentityOperator",
    "RadonOperator",
    "assemble",
    "save_matrix_market",
]

DEFAULT_NNZ_BUDGET = 200_000_000


class LinearOperator:
    """Minimal apply/adjoint protocol the solvers are written against."""

    rows: int
    cols: int

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Forward map; accepts (cols,) or (cols, k)."""
        raise NotImplementedError

    def adjoint(self, u: np.ndarray) -> np.ndarray:
        """Transpose map; accepts (rows,) or (rows, k)."""
        raise NotImplementedError


class IdentityOperator(LinearOperator):
    def __init__(self, n: int):
        self.rows = self.cols = int(n)

    def apply(self, v):
        return np.array(v, dtype=float, copy=True)

    def adjoint(self, u):
        return np.array(u, dtype=float, copy=True)


class RadonOperator(LinearOperator):
    """Base for assembled operators; concrete storage in subclasses."""

    def __init__(self, grid: PixelGrid, geometry, weight_mode: str):
        self.grid = grid
        self.geometry = geometry
        self.kind = "half-space" if isinstance(geometry, HalfSpaceSet) else "ball"
        self.weight_mode = weight_mode
        self.weight = grid.pixel_volume if weight_mode == "density" else 1.0
        self.rows = geometry.row_count
        self.cols = grid.num_pixels

    storage = ""

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "storage": self.storage,
            "rows": self.rows,
            "cols": self.cols,
            "weight": self.weight,
            "weight_mode": self.weight_mode,
            "grid": {
                "origin": list(self.grid.origin),
                "spacing": list(self.grid.spacing),
                "shape": list(self.grid.shape),
            },
            "geometry_sha256": _geometry_hash(self.geometry),
        }


def _as_matrix(x, n, what):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != n:
        raise ValidationError(f"{what} has length {x.shape[0]}, expected {n}")
    if x.ndim == 1:
        return x[:, None], True
    if x.ndim == 2:
        return x, False
    raise ValidationError(f"{what} must be 1-D or 2-D")


class PatternOperator(RadonOperator):
    """Explicit row-compressed binary pattern with uniform entry weight."""

    storage = "explicit-sparse"

    def __init__(self, grid, geometry, weight_mode, indptr, indices):
        super().__init__(grid, geometry, weight_mode)
        self.indptr = indptr
        self.indices = indices

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def row_indices(self, j: int) -> np.ndarray:
        return self.indices[self.indptr[j] : self.indptr[j + 1]]

    def apply(self, v):
        v, single = _as_matrix(v, self.cols, "pixel vector")
        out = np.empty((self.rows, v.shape[1]))
        for c in range(v.shape[1]):
            out[:, c] = _kernels.pattern_matvec(
                self.indptr, self.indices, np.ascontiguousarray(v[:, c])
            )
        out *= self.weight
        return out[:, 0] if single else out

    def adjoint(self, u):
        u, single = _as_matrix(u, self.rows, "measurement vector")
        out = np.empty((self.cols, u.shape[1]))
        for c in range(u.shape[1]):
            out[:, c] = _kernels.pattern_rmatvec(
                self.indptr, self.indices, np.ascontiguousarray(u[:, c]), self.cols
            )
        out *= self.weight
        return out[:, 0] if single else out

    def to_scipy(self):
        from scipy.sparse import csr_matrix

        data = np.full(self.nnz, self.weight)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.rows, self.cols))


class HalfSpaceCumsumOperator(RadonOperator):
    """Matrix-free half-space operator.

    Pixels are pre-sorted by their projection onto each direction; a forward
    apply is one cumulative sum per direction read off at the offset
    positions, and the adjoint distributes suffix sums back. Applies reuse
    internal scratch buffers, so share an instance across processes, not
    threads.
    """

    storage = "matrix-free"

    def __init__(self, grid, geometry: HalfSpaceSet, weight_mode):
        super().__init__(grid, geometry, weight_mode)
        proj = (grid.centers - geometry.center) @ geometry.directions.T  # (P, ndir)
        self._order = np.argsort(proj, axis=0, kind="stable").T.copy()  # (ndir, P)
        sorted_proj = np.take_along_axis(proj.T, self._order, axis=1)
        self._pos = np.stack(
            [
                np.searchsorted(sorted_proj[d], geometry.offsets, side="right")
                for d in range(sorted_proj.shape[0])
            ]
        )  # (ndir, noff)
        self._take = np.clip(self._pos - 1, 0, grid.num_pixels - 1)
        self._zero_mask = self._pos == 0
        # scratch for the single-vector paths; fresh large allocations per
        # apply cost more in page faults than the arithmetic itself
        ndir, P = self._order.shape
        self._scratch = np.empty((ndir, P))
        self._scratch2 = np.empty((ndir, P + 1))

    def apply(self, v):
        v, single = _as_matrix(v, self.cols, "pixel vector")
        ndir, P = self._order.shape
        noff = self._pos.shape[1]
        if single:
            np.take(v[:, 0], self._order, out=self._scratch)
            csum = np.cumsum(self._scratch, axis=1, out=self._scratch)
            out = np.take_along_axis(csum, self._take, axis=1)
            out[self._zero_mask] = 0.0
            return out.reshape(ndir * noff) * self.weight
        csum = np.cumsum(v[self._order], axis=1)
        out = np.take_along_axis(csum, self._take[:, :, None], axis=1)
        out[self._zero_mask] = 0.0
        return out.reshape(ndir * noff, v.shape[1]) * self.weight

    def adjoint(self, u):
        u, single = _as_matrix(u, self.rows, "measurement vector")
        ndir, P = self._order.shape
        noff = self._pos.shape[1]
        k = u.shape[1]
        dd = np.broadcast_to(np.arange(ndir)[:, None], self._pos.shape)
        flat_order = self._order.ravel()
        if single:
            u2 = u[:, 0].reshape(ndir, noff)
            # delta[d, t]: total paid by sorted pixels of rank >= t
            delta = self._scratch2
            delta[:] = 0.0
            delta[:, 0] = u2.sum(axis=1)
            np.subtract.at(delta, (dd, self._pos), u2)
            vals = np.cumsum(delta[:, :P], axis=1, out=delta[:, :P])
            out = np.bincount(flat_order, weights=vals.ravel(), minlength=self.cols)
            return out * self.weight
        u3 = u.reshape(ndir, noff, k)
        delta = np.zeros((ndir, P + 1, k))
        delta[:, 0, :] = u3.sum(axis=1)
        np.subtract.at(delta, (dd, self._pos), u3)
        vals = np.cumsum(delta[:, :P, :], axis=1)
        out = np.empty((self.cols, k))
        for c in range(k):
            out[:, c] = np.bincount(
                flat_order, weights=vals[:, :, c].ravel(), minlength=self.cols
            )
        return out * self.weight


class BallFftOperator(RadonOperator):
    """Matrix-free ball operator for lattice-aligned centers.

    Membership of pixel centers in a ball around a lattice point is a
    translation-invariant stencil per radius, so the forward map is a
    zero-padded convolution with cached kernel FFTs. Exactly matches the
    explicit pattern whenever lattice coordinates are exactly representable
    (integer-friendly origins and spacings, as in the default grids).
    """

    storage = "matrix-free"

    def __init__(self, grid, geometry: BallSet, weight_mode):
        super().__init__(grid, geometry, weight_mode)
        idx = lattice_center_indices(grid, geometry)
        if idx is None:
            raise ValidationError(
                "matrix-free ball storage needs centers on the pixel lattice; "
                "use explicit-sparse storage instead"
            )
        self._center_idx = idx
        self._gather = not np.array_equal(idx, np.arange(grid.num_pixels))
        h = np.asarray(grid.spacing)
        radii = geometry.radii
        L = np.floor(radii[-1] / h).astype(int)
        self._L = L
        self._pad = tuple(sfft.next_fast_len(n + 2 * l) for n, l in zip(grid.shape, L))
        self._axes = tuple(range(grid.dim))
        offs = np.meshgrid(*[(np.arange(2 * l + 1) - l) * hh for l, hh in zip(L, h)], indexing="ij")
        d2 = sum(o * o for o in offs)
        self._khat = [
            sfft.rfftn((d2 <= r * r).astype(float), s=self._pad, axes=self._axes) for r in radii
        ]
        self._crop = tuple(slice(l, l + n) for l, n in zip(L, grid.shape))

    def _fft(self, img):
        return sfft.rfftn(img, s=self._pad, axes=self._axes)

    def _ifft(self, spec):
        return sfft.irfftn(spec, s=self._pad, axes=self._axes)[self._crop]

    def apply(self, v):
        v, single = _as_matrix(v, self.cols, "pixel vector")
        k = v.shape[1]
        img = v.reshape(self.grid.shape + (k,))
        vhat = self._fft(img)
        nrad = len(self._khat)
        out = np.empty((self.cols if not self._gather else len(self._center_idx), nrad, k))
        for r, khat in enumerate(self._khat):
            conv = self._ifft(vhat * khat[..., None]).reshape(-1, k)
            out[:, r, :] = conv[self._center_idx] if self._gather else conv
        out = out.reshape(self.rows, k) * self.weight
        return out[:, 0] if single else out

    def adjoint(self, u):
        u, single = _as_matrix(u, self.rows, "measurement vector")
        k = u.shape[1]
        u3 = u.reshape(-1, len(self._khat), k)
        acc = None
        for r, khat in enumerate(self._khat):
            if self._gather:
                img = np.zeros((self.cols, k))
                img[self._center_idx] = u3[:, r, :]
            else:
                img = u3[:, r, :]
            term = self._fft(img.reshape(self.grid.shape + (k,))) * khat[..., None]
            acc = term if acc is None else acc + term
        out = self._ifft(acc).reshape(self.cols, k) * self.weight
        return out[:, 0] if single else out


def lattice_center_indices(grid: PixelGrid, geometry: BallSet):
    """Flat pixel indices of ball centers, or None if any is off-lattice."""
    if geometry.dim != grid.dim:
        return None
    h = np.asarray(grid.spacing)
    rel = (geometry.centers - (grid.box_lo + 0.5 * h)) / h
    idx = np.rint(rel)
    if np.max(np.abs(rel - idx), initial=0.0) > 1e-9:
        return None
    if np.any(idx < 0) or np.any(idx >= np.asarray(grid.shape)):
        return None
    return np.ravel_multi_index(tuple(idx.astype(int).T), grid.shape)


def _halfspace_pattern(grid: PixelGrid, geometry: HalfSpaceSet, budget: int):
    proj = (grid.centers - geometry.center) @ geometry.directions.T
    ndir = geometry.directions.shape[0]
    offsets = geometry.offsets
    order = np.argsort(proj, axis=0, kind="stable").T.astype(np.int32)
    pos = np.stack(
        [
            np.searchsorted(proj[order[d], d], offsets, side="right")
            for d in range(ndir)
        ]
    )
    nnz = int(pos.sum())
    if nnz > budget:
        raise CapacityError(
            f"explicit half-space pattern needs {nnz} nonzeros "
            f"(budget {budget}); use matrix-free storage"
        )
    indptr = np.zeros(geometry.row_count + 1, dtype=np.int64)
    np.cumsum(pos.reshape(-1), out=indptr[1:])
    indices = np.empty(nnz, dtype=np.int32)
    noff = offsets.shape[0]
    for d in range(ndir):
        for j in range(noff):
            row = d * noff + j
            indices[indptr[row] : indptr[row + 1]] = order[d, : pos[d, j]]
    return indptr, indices


def _ball_nnz_upper_bound(grid: PixelGrid, geometry: BallSet) -> int:
    h = np.asarray(grid.spacing)
    P = grid.num_pixels
    per_center = sum(
        min(P, int(np.prod(2 * np.floor(r / h) + 1))) for r in geometry.radii
    )
    return per_center * geometry.centers.shape[0]


def assemble(
    grid: PixelGrid,
    geometry,
    storage: str = "auto",
    weight_mode: str = "density",
    nnz_budget: int = DEFAULT_NNZ_BUDGET,
) -> RadonOperator:
    """Build the discretized Radon operator for a grid and geometry.

    ``storage='auto'`` picks matrix-free for half spaces and explicit-sparse
    for balls (matrix-free if the explicit pattern would blow the nonzero
    budget). ``weight_mode='density'`` scales entries by the pixel volume so
    ``R v`` approximates region masses of a density ``v``; ``'paper-literal'``
    keeps unit entries for raw-count work.
    """
    if geometry.dim != grid.dim:
        raise ValidationError("geometry and grid dimensions differ")
    if weight_mode not in ("density", "paper-literal"):
        raise ValidationError("weight_mode must be 'density' or 'paper-literal'")
    if storage not in ("auto", "explicit-sparse", "matrix-free"):
        raise ValidationError(f"unknown storage {storage!r}")

    if isinstance(geometry, HalfSpaceSet):
        if storage in ("auto", "matrix-free"):
            return HalfSpaceCumsumOperator(grid, geometry, weight_mode)
        indptr, indices = _halfspace_pattern(grid, geometry, nnz_budget)
        return PatternOperator(grid, geometry, weight_mode, indptr, indices)

    if isinstance(geometry, BallSet):
        if storage == "matrix-free":
            return BallFftOperator(grid, geometry, weight_mode)
        bound = _ball_nnz_upper_bound(grid, geometry)
        if storage == "auto" and bound > nnz_budget:
            if lattice_center_indices(grid, geometry) is not None:
                return BallFftOperator(grid, geometry, weight_mode)
            raise CapacityError(
                f"explicit ball pattern may need up to {bound} nonzeros "
                f"(budget {nnz_budget}) and the centers are off-lattice; "
                "raise the budget or use lattice centers"
            )
        if bound > nnz_budget:
            raise CapacityError(
                f"explicit ball pattern may need up to {bound} nonzeros "
                f"(budget {nnz_budget}); use matrix-free storage"
            )
        indptr, indices = _kernels.ball_pattern(
            np.ascontiguousarray(grid.centers),
            np.ascontiguousarray(geometry.centers),
            geometry.radii**2,
        )
        return PatternOperator(grid, geometry, weight_mode, indptr, indices)

    raise ValidationError(f"unsupported geometry type {type(geometry).__name__}")


def _geometry_hash(geometry) -> str:
    h = hashlib.sha256()
    if isinstance(geometry, HalfSpaceSet):
        h.update(b"half-space")
        for arr in (geometry.directions, geometry.offsets, geometry.center):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    else:
        h.update(b"ball")
        for arr in (geometry.centers, geometry.radii):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    return h.hexdigest()


def save_matrix_market(path, op: PatternOperator, metadata_path=None) -> None:
    """Matrix Market coordinate export plus an optional metadata JSON."""
    if not isinstance(op, PatternOperator):
        raise ValidationError("only explicit-sparse operators can be exported")
    from scipy.io import mmwrite

    mmwrite(str(path), op.to_scipy())
    if metadata_path is not None:
        with open(metadata_path, "w", encoding="utf-8") as fh:
            json.dump(op.metadata(), fh, indent=2)
