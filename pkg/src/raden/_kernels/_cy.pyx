# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled counting and sparse-pattern kernels.

Mirrors the numpy backend in ``_np.py``; see that module for the shared
semantics (closed inequalities, ascending thresholds, row ordering).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline Py_ssize_t _lower_bound(const double* arr, Py_ssize_t n, double value) noexcept nogil:
    # first index k with arr[k] >= value; n if none
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] < value:
            lo = mid + 1
        else:
            hi = mid
    return lo


def halfspace_counts(cnp.ndarray[cnp.float64_t, ndim=2] proj,
                     cnp.ndarray[cnp.float64_t, ndim=1] offsets):
    """Counts of ``proj[:, d] <= offsets[k]`` per direction and offset."""
    cdef Py_ssize_t m = proj.shape[0]
    cdef Py_ssize_t ndir = proj.shape[1]
    cdef Py_ssize_t noff = offsets.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] counts = np.zeros((ndir, noff), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] hist = np.zeros(noff + 1, dtype=np.int64)
    cdef Py_ssize_t d, i, k, b
    cdef cnp.int64_t acc
    cdef const double* off = <const double*> offsets.data
    with nogil:
        for d in range(ndir):
            for k in range(noff + 1):
                hist[k] = 0
            for i in range(m):
                # point counts toward every offset >= its projection
                b = _lower_bound(off, noff, proj[i, d])
                hist[b] += 1
            acc = 0
            for k in range(noff):
                acc += hist[k]
                counts[d, k] = acc
    return counts


def ball_counts(cnp.ndarray[cnp.float64_t, ndim=2] points,
                cnp.ndarray[cnp.float64_t, ndim=2] centers,
                cnp.ndarray[cnp.float64_t, ndim=1] radii2):
    """Counts of ``|x - c|^2 <= r^2`` per center and radius."""
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t dim = points.shape[1]
    cdef Py_ssize_t K = centers.shape[0]
    cdef Py_ssize_t nrad = radii2.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] counts = np.zeros((K, nrad), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] hist = np.zeros(nrad + 1, dtype=np.int64)
    cdef Py_ssize_t j, i, a, k, b
    cdef double d2, diff
    cdef cnp.int64_t acc
    cdef const double* r2 = <const double*> radii2.data
    with nogil:
        for j in range(K):
            for k in range(nrad + 1):
                hist[k] = 0
            for i in range(m):
                d2 = 0.0
                for a in range(dim):
                    diff = points[i, a] - centers[j, a]
                    d2 += diff * diff
                b = _lower_bound(r2, nrad, d2)
                hist[b] += 1
            acc = 0
            for k in range(nrad):
                acc += hist[k]
                counts[j, k] = acc
    return counts


def ball_pattern(cnp.ndarray[cnp.float64_t, ndim=2] pixels,
                 cnp.ndarray[cnp.float64_t, ndim=2] centers,
                 cnp.ndarray[cnp.float64_t, ndim=1] radii2):
    """CSR membership pattern for ball rows (center-major, radius-fastest)."""
    cdef Py_ssize_t P = pixels.shape[0]
    cdef Py_ssize_t dim = pixels.shape[1]
    cdef Py_ssize_t K = centers.shape[0]
    cdef Py_ssize_t nrad = radii2.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] counts = ball_counts(pixels, centers, radii2)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] indptr = np.zeros(K * nrad + 1, dtype=np.int64)
    np.cumsum(counts.reshape(-1), out=indptr[1:])
    cdef cnp.ndarray[cnp.int32_t, ndim=1] indices = np.empty(indptr[K * nrad], dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cursor = np.zeros(nrad, dtype=np.int64)
    cdef Py_ssize_t j, i, a, k, b
    cdef double d2, diff
    cdef const double* r2 = <const double*> radii2.data
    with nogil:
        for j in range(K):
            for k in range(nrad):
                cursor[k] = indptr[j * nrad + k]
            for i in range(P):
                d2 = 0.0
                for a in range(dim):
                    diff = pixels[i, a] - centers[j, a]
                    d2 += diff * diff
                b = _lower_bound(r2, nrad, d2)
                for k in range(b, nrad):
                    indices[cursor[k]] = <cnp.int32_t> i
                    cursor[k] += 1
    return indptr, indices


def pattern_matvec(cnp.ndarray[cnp.int64_t, ndim=1] indptr,
                   cnp.ndarray[cnp.int32_t, ndim=1] indices,
                   cnp.ndarray[cnp.float64_t, ndim=1] v):
    """Row sums of ``v`` gathered through a binary CSR pattern."""
    cdef Py_ssize_t rows = indptr.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(rows, dtype=np.float64)
    cdef Py_ssize_t j, t
    cdef double acc
    with nogil:
        for j in range(rows):
            acc = 0.0
            for t in range(indptr[j], indptr[j + 1]):
                acc += v[indices[t]]
            out[j] = acc
    return out


def pattern_rmatvec(cnp.ndarray[cnp.int64_t, ndim=1] indptr,
                    cnp.ndarray[cnp.int32_t, ndim=1] indices,
                    cnp.ndarray[cnp.float64_t, ndim=1] u,
                    Py_ssize_t cols):
    """Transpose action of the binary CSR pattern."""
    cdef Py_ssize_t rows = indptr.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(cols, dtype=np.float64)
    cdef Py_ssize_t j, t
    cdef double uj
    with nogil:
        for j in range(rows):
            uj = u[j]
            if uj != 0.0:
                for t in range(indptr[j], indptr[j + 1]):
                    out[indices[t]] += uj
    return out
