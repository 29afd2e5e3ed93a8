"""Pure numpy implementations of the hot counting and sparse-pattern kernels.

Semantics are shared with the compiled backend in ``_cy.pyx``: closed
inequalities everywhere (a point on a half-space boundary or sphere is
inside), ascending thresholds, row-major (group-major, threshold-fastest)
row order. Squared distances accumulate axis by axis in the same order as
the compiled loops so both backends agree bitwise on membership.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"

# keep per-chunk scratch arrays around this many doubles
_CHUNK_BUDGET = 4_000_000


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared distances, shape (len(centers), len(points))."""
    d2 = np.zeros((centers.shape[0], points.shape[0]))
    for a in range(points.shape[1]):
        diff = points[None, :, a] - centers[:, None, a]
        d2 += diff * diff
    return d2


def halfspace_counts(proj: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Counts of ``proj[:, d] <= offsets[k]`` for every direction and offset.

    ``proj`` holds the point projections onto each direction, shape
    (m, n_directions); ``offsets`` is ascending. Returns int64
    (n_directions, n_offsets).
    """
    m, ndir = proj.shape
    counts = np.empty((ndir, offsets.shape[0]), dtype=np.int64)
    for d in range(ndir):
        col = np.sort(proj[:, d])
        counts[d] = np.searchsorted(col, offsets, side="right")
    return counts


def ball_counts(points: np.ndarray, centers: np.ndarray, radii2: np.ndarray) -> np.ndarray:
    """Counts of ``|x - c|^2 <= r^2`` for every center and radius.

    ``radii2`` is ascending squared radii. Returns int64 (n_centers, n_radii).
    """
    m = max(points.shape[0], 1)
    nrad = radii2.shape[0]
    K = centers.shape[0]
    counts = np.empty((K, nrad), dtype=np.int64)
    chunk = max(1, _CHUNK_BUDGET // m)
    for lo in range(0, K, chunk):
        hi = min(K, lo + chunk)
        if points.shape[0] == 0:
            counts[lo:hi] = 0
            continue
        d2 = _sq_dists(points, centers[lo:hi])
        bins = np.searchsorted(radii2, d2, side="left")
        width = nrad + 1
        flat = bins + (np.arange(hi - lo) * width)[:, None]
        hist = np.bincount(flat.ravel(), minlength=(hi - lo) * width)
        hist = hist.reshape(hi - lo, width)[:, :nrad]
        counts[lo:hi] = np.cumsum(hist, axis=1)
    return counts


def ball_pattern(
    pixels: np.ndarray, centers: np.ndarray, radii2: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """CSR membership pattern for ball rows (center-major, radius-fastest).

    Returns ``(indptr, indices)`` with int64 indptr and int32 indices.
    Row content is a set; index order within a row is backend specific.
    """
    P = pixels.shape[0]
    K = centers.shape[0]
    nrad = radii2.shape[0]
    counts = ball_counts(pixels, centers, radii2)
    indptr = np.zeros(K * nrad + 1, dtype=np.int64)
    np.cumsum(counts.reshape(-1), out=indptr[1:])
    indices = np.empty(indptr[-1], dtype=np.int32)
    chunk = max(1, _CHUNK_BUDGET // max(P, 1))
    for lo in range(0, K, chunk):
        hi = min(K, lo + chunk)
        d2 = _sq_dists(pixels, centers[lo:hi])
        order = np.argsort(d2, axis=1, kind="stable").astype(np.int32)
        for j in range(lo, hi):
            row0 = j * nrad
            ordj = order[j - lo]
            for k in range(nrad):
                n = counts[j, k]
                indices[indptr[row0 + k] : indptr[row0 + k] + n] = ordj[:n]
    return indptr, indices


def pattern_matvec(indptr: np.ndarray, indices: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row sums of ``v`` gathered through a binary CSR pattern."""
    rows = indptr.shape[0] - 1
    out = np.empty(rows, dtype=np.float64)
    row = 0
    while row < rows:
        # take whole rows until the gather scratch would exceed the budget
        end = int(np.searchsorted(indptr, indptr[row] + _CHUNK_BUDGET, side="right") - 1)
        end = min(max(end, row + 1), rows)
        a, b = indptr[row], indptr[end]
        gathered = v[indices[a:b]]
        starts = (indptr[row:end] - a).astype(np.intp)
        seg = np.add.reduceat(gathered, starts) if b > a else np.zeros(end - row)
        lens = np.diff(indptr[row : end + 1])
        seg = np.where(lens > 0, seg, 0.0)
        out[row:end] = seg
        row = end
    return out


def pattern_rmatvec(
    indptr: np.ndarray, indices: np.ndarray, u: np.ndarray, cols: int
) -> np.ndarray:
    """Transpose action of the binary CSR pattern."""
    rows = indptr.shape[0] - 1
    out = np.zeros(cols, dtype=np.float64)
    row = 0
    while row < rows:
        end = int(np.searchsorted(indptr, indptr[row] + _CHUNK_BUDGET, side="right") - 1)
        end = min(max(end, row + 1), rows)
        a, b = indptr[row], indptr[end]
        if b > a:
            lens = np.diff(indptr[row : end + 1])
            expanded = np.repeat(u[row:end], lens)
            out += np.bincount(indices[a:b], weights=expanded, minlength=cols)
        row = end
    return out
