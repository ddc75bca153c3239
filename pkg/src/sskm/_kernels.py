"""Compiled numeric kernels shared by every module.

All kernels sum in ascending dimension order with a plain sequential loop so
that the same pair of vectors always yields the same bits, whichever code path
(full scan, NCC, index) asks for the product.
"""

import numpy as np
from numba import njit

# Long side must exceed the short side by this factor before galloping wins.
GALLOP_RATIO = 8


@njit(nogil=True, cache=True)
def gallop(idx, lo, hi, target):
    """Return the first position in ``idx[lo:hi]`` whose value is >= target."""
    if lo >= hi or idx[lo] >= target:
        return lo
    prev = lo
    step = 1
    cur = lo + 1
    while cur < hi and idx[cur] < target:
        prev = cur
        step <<= 1
        cur = prev + step
    if cur > hi:
        cur = hi
    lo = prev + 1
    while lo < cur:
        mid = (lo + cur) >> 1
        if idx[mid] < target:
            lo = mid + 1
        else:
            cur = mid
    return lo


@njit(nogil=True, cache=True)
def sparse_dot(ai, aw, a0, a1, bi, bw, b0, b1):
    """Dot product of ``a[a0:a1]`` and ``b[b0:b1]`` (sorted coordinate slices)."""
    na = a1 - a0
    nb = b1 - b0
    if na == 0 or nb == 0:
        return 0.0
    if nb > GALLOP_RATIO * na or na > GALLOP_RATIO * nb:
        # keep the summation in ascending shared-dim order either way
        if na > nb:
            ai, aw, a0, a1, bi, bw, b0, b1 = bi, bw, b0, b1, ai, aw, a0, a1
        s = 0.0
        q = b0
        for p in range(a0, a1):
            d = ai[p]
            q = gallop(bi, q, b1, d)
            if q >= b1:
                break
            if bi[q] == d:
                s += aw[p] * bw[q]
                q += 1
        return s
    s = 0.0
    p = a0
    q = b0
    while p < a1 and q < b1:
        da = ai[p]
        db = bi[q]
        if da == db:
            s += aw[p] * bw[q]
            p += 1
            q += 1
        elif da < db:
            p += 1
        else:
            q += 1
    return s


@njit(nogil=True, cache=True)
def sq_norm(w, lo, hi):
    s = 0.0
    for p in range(lo, hi):
        s += w[p] * w[p]
    return s


@njit(nogil=True, cache=True)
def sparse_sq_euclidean(ai, aw, a0, a1, bi, bw, b0, b1):
    s = 0.0
    p = a0
    q = b0
    while p < a1 or q < b1:
        if q >= b1 or (p < a1 and ai[p] < bi[q]):
            s += aw[p] * aw[p]
            p += 1
        elif p >= a1 or bi[q] < ai[p]:
            s += bw[q] * bw[q]
            q += 1
        else:
            diff = aw[p] - bw[q]
            s += diff * diff
            p += 1
            q += 1
    return s


@njit(nogil=True, cache=True)
def csr_row_dots(x_indptr, x_indices, x_data, row, c_indptr, c_indices, c_data, out):
    """Fill ``out[j]`` with the dot product of data row ``row`` and centroid j."""
    x0 = x_indptr[row]
    x1 = x_indptr[row + 1]
    for j in range(out.shape[0]):
        out[j] = sparse_dot(x_indices, x_data, x0, x1,
                            c_indices, c_data, c_indptr[j], c_indptr[j + 1])


@njit(nogil=True, cache=True)
def centroid_sums(x_indptr, x_indices, x_data, order, bounds, n_dims):
    """Sum member rows per cluster in ascending row order.

    ``order`` lists rows grouped by cluster (ascending row id inside each
    group) and ``bounds[j]:bounds[j + 1]`` delimits cluster j.  Returns raw
    (unnormalized) sums in CSR layout with sorted dims and zeros dropped.
    """
    k = bounds.shape[0] - 1
    acc = np.zeros(n_dims, dtype=np.float64)
    seen = np.zeros(n_dims, dtype=np.bool_)
    touched = np.empty(n_dims, dtype=np.int64)
    indptr = np.zeros(k + 1, dtype=np.int64)
    # each stored data entry contributes to at most one cluster entry
    cap = x_indices.shape[0]
    indices = np.empty(cap, dtype=np.int64)
    data = np.empty(cap, dtype=np.float64)
    nnz = 0
    for j in range(k):
        nt = 0
        for t in range(bounds[j], bounds[j + 1]):
            r = order[t]
            for p in range(x_indptr[r], x_indptr[r + 1]):
                d = x_indices[p]
                if not seen[d]:
                    seen[d] = True
                    touched[nt] = d
                    nt += 1
                acc[d] += x_data[p]
        dims = np.sort(touched[:nt])
        for d in dims:
            w = acc[d]
            if w != 0.0:
                indices[nnz] = d
                data[nnz] = w
                nnz += 1
            acc[d] = 0.0
            seen[d] = False
        indptr[j + 1] = nnz
    return indptr, indices[:nnz].copy(), data[:nnz].copy()
