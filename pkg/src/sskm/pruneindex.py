"""Threshold pruning index over unit-length sparse centroids.

For a unit query ``x`` and unit centroid ``c``, ``dot(c, x) >= lam`` forces the
squared centroid weights on the support of ``x`` to sum to at least ``lam**2``.
Each centroid is therefore indexed only under the dims that start a run of
its largest weights long enough to reach that mass, together with the run
length (the minimum number of dims a query has to share with the centroid).
A query keeps a centroid when it hits such a dim and shares enough dims.

The shared general map (dim -> centroids) supplies those overlap counts and is
built once per centroid snapshot; one threshold map is built per ``lam``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit

from sskm import _kernels
from sskm.corpus import CorpusMatrix, as_csr, csr_arrays
from sskm.sparsevec import SparseVector

DEFAULT_LAMBDAS = (0.1, 0.25, 0.4, 0.6)

# Subtracted from lam**2 so rounding in the running sums can only add
# candidates, never drop a true one.
SQ_SLACK = 1e-9

CENTROID_UNIT_TOL = 1e-6


@njit(nogil=True, cache=True)
def _build_general(c_indptr, c_indices, n_dims):
    k = c_indptr.shape[0] - 1
    indptr = np.zeros(n_dims + 1, dtype=np.int64)
    for p in range(c_indices.shape[0]):
        indptr[c_indices[p] + 1] += 1
    for d in range(n_dims):
        indptr[d + 1] += indptr[d]
    fill = indptr[:-1].copy()
    ids = np.empty(c_indices.shape[0], dtype=np.int64)
    for j in range(k):
        for p in range(c_indptr[j], c_indptr[j + 1]):
            d = c_indices[p]
            ids[fill[d]] = j
            fill[d] += 1
    return indptr, ids


@njit(nogil=True, cache=True)
def _build_threshold(c_indptr, c_indices, c_data, thr, n_dims):
    """Per-centroid sliding window over weights sorted by magnitude.

    Returns CSR postings (dim -> centroid ids, min overlaps) and the number of
    squared-value additions plus subtractions spent on each centroid.
    """
    k = c_indptr.shape[0] - 1
    total = c_indices.shape[0]
    e_dim = np.empty(total, dtype=np.int64)
    e_cid = np.empty(total, dtype=np.int64)
    e_min = np.empty(total, dtype=np.int64)
    ops = np.zeros(k, dtype=np.int64)
    n = 0
    for j in range(k):
        lo = c_indptr[j]
        m = c_indptr[j + 1] - lo
        w = c_data[lo:lo + m]
        # stable sort keeps ascending dim among equal magnitudes
        order = np.argsort(-np.abs(w), kind="mergesort")
        s = 0.0
        end = 0
        for p in range(m):
            if end <= p:
                end = p
                s = 0.0
            while end < m and s < thr:
                v = w[order[end]]
                s += v * v
                end += 1
                ops[j] += 1
            if s < thr:
                break
            e_dim[n] = c_indices[lo + order[p]]
            e_cid[n] = j
            e_min[n] = end - p
            n += 1
            if end == p + 1:
                s = 0.0
            else:
                v = w[order[p]]
                s -= v * v
            ops[j] += 1
    indptr = np.zeros(n_dims + 1, dtype=np.int64)
    for t in range(n):
        indptr[e_dim[t] + 1] += 1
    for d in range(n_dims):
        indptr[d + 1] += indptr[d]
    fill = indptr[:-1].copy()
    ids = np.empty(n, dtype=np.int64)
    mins = np.empty(n, dtype=np.int64)
    # entries were emitted in ascending centroid order, so postings stay sorted
    for t in range(n):
        d = e_dim[t]
        ids[fill[d]] = e_cid[t]
        mins[fill[d]] = e_min[t]
        fill[d] += 1
    return indptr, ids, mins, ops


@njit(nogil=True, cache=True)
def overlap_count_kernel(g_indptr, g_ids, xi, x0, x1, counts, touched):
    """Add support overlaps of ``x`` into ``counts``; returns #touched centroids."""
    nt = 0
    for p in range(x0, x1):
        d = xi[p]
        if d >= g_indptr.shape[0] - 1:
            continue
        for q in range(g_indptr[d], g_indptr[d + 1]):
            c = g_ids[q]
            if counts[c] == 0:
                touched[nt] = c
                nt += 1
            counts[c] += 1
    return nt


@njit(nogil=True, cache=True)
def candidate_kernel(p_indptr, p_ids, p_min, xi, x0, x1, counts, mark, out):
    """Write candidate centroid ids into ``out``; ``mark`` is left cleared."""
    n = 0
    for p in range(x0, x1):
        d = xi[p]
        if d >= p_indptr.shape[0] - 1:
            continue
        for q in range(p_indptr[d], p_indptr[d + 1]):
            c = p_ids[q]
            if not mark[c] and counts[c] >= p_min[q]:
                mark[c] = True
                out[n] = c
                n += 1
    for t in range(n):
        mark[out[t]] = False
    return n


@dataclass(frozen=True)
class GeneralIndex:
    """dim -> ids of centroids with a nonzero weight there (CSR over dims)."""

    indptr: np.ndarray
    ids: np.ndarray
    n_centroids: int

    @property
    def n_dims(self) -> int:
        return self.indptr.shape[0] - 1

    def postings(self, dim: int) -> np.ndarray:
        return self.ids[self.indptr[dim]:self.indptr[dim + 1]]


@dataclass(frozen=True)
class ThresholdIndex:
    """dim -> (centroid id, minimum overlap) postings valid for one ``lam``."""

    lam: float
    indptr: np.ndarray
    ids: np.ndarray
    min_overlap: np.ndarray
    build_ops: np.ndarray

    def postings(self, dim: int) -> list[tuple[int, int]]:
        lo, hi = self.indptr[dim], self.indptr[dim + 1]
        return list(zip(self.ids[lo:hi].tolist(), self.min_overlap[lo:hi].tolist()))

    def entries(self, centroid: int | None = None) -> set[tuple[int, int]] | set[tuple[int, int, int]]:
        """``{(dim, min_overlap)}`` for one centroid, or ``{(dim, id, min_overlap)}``."""
        dims = np.repeat(np.arange(self.indptr.shape[0] - 1), np.diff(self.indptr))
        triples = zip(dims.tolist(), self.ids.tolist(), self.min_overlap.tolist())
        if centroid is None:
            return set(triples)
        return {(d, o) for d, c, o in triples if c == centroid}


@dataclass(frozen=True)
class MultiIndex:
    general: GeneralIndex
    thresholds: tuple[ThresholdIndex, ...]

    @property
    def lambdas(self) -> tuple[float, ...]:
        return tuple(t.lam for t in self.thresholds)

    def select_threshold(self, baseline_sim: float) -> ThresholdIndex | None:
        return select_threshold(self, baseline_sim)

    def query(self, x: SparseVector, baseline_sim: float) -> np.ndarray | None:
        """Candidates for ``x`` under the threshold chosen by ``baseline_sim``.

        None means no threshold applies and every centroid must be scanned.
        """
        t = self.select_threshold(baseline_sim)
        if t is None:
            return None
        return candidates(t, x, overlap_counts(self.general, x))

    def stacked(self):
        """Flat arrays for the compiled assignment loop."""
        lams = np.array(self.lambdas, dtype=np.float64)
        sizes = [t.ids.shape[0] for t in self.thresholds]
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        indptr = np.stack([t.indptr + off for t, off in zip(self.thresholds, offsets)])
        ids = np.concatenate([t.ids for t in self.thresholds])
        mins = np.concatenate([t.min_overlap for t in self.thresholds])
        return lams, indptr, ids, mins


def check_lambdas(lambdas: Sequence[float]) -> np.ndarray:
    lams = np.asarray(lambdas, dtype=np.float64).reshape(-1)
    if lams.size == 0:
        raise ValueError("at least one lambda is required")
    if np.any((lams <= 0.0) | (lams >= 1.0)):
        raise ValueError(f"every lambda must lie in (0, 1), got {lams.tolist()}")
    if np.any(np.diff(lams) <= 0.0):
        raise ValueError(f"lambdas must be strictly ascending, got {lams.tolist()}")
    return lams


def _centroid_csr(centroids, n_dims: int | None) -> sp.csr_matrix:
    if sp.issparse(centroids):
        return as_csr(centroids)
    vecs = list(centroids)
    if n_dims is None:
        n_dims = max((v.n_dims for v in vecs), default=0)
    return CorpusMatrix.from_vectors(vecs, n_dims=n_dims).matrix


def build_index(centroids: Sequence[SparseVector] | sp.spmatrix,
                lambdas: Sequence[float] = DEFAULT_LAMBDAS,
                n_dims: int | None = None, check_unit: bool = True) -> MultiIndex:
    """Build the general map once and one threshold map per lambda.

    Raises
    ------
    ValueError
        If a centroid is not unit length (deviation above 1e-6) or a lambda
        lies outside (0, 1).
    """
    lams = check_lambdas(lambdas)
    m = _centroid_csr(centroids, n_dims)
    c_indptr, c_indices, c_data = csr_arrays(m)
    if check_unit:
        for j in range(m.shape[0]):
            norm = np.sqrt(_kernels.sq_norm(c_data, c_indptr[j], c_indptr[j + 1]))
            if abs(norm - 1.0) > CENTROID_UNIT_TOL:
                raise ValueError(f"centroid {j} is not unit length (norm {norm!r})")
    g_indptr, g_ids = _build_general(c_indptr, c_indices, m.shape[1])
    general = GeneralIndex(g_indptr, g_ids, m.shape[0])
    thresholds = []
    for lam in lams.tolist():
        indptr, ids, mins, ops = _build_threshold(c_indptr, c_indices, c_data,
                                                  lam * lam - SQ_SLACK, m.shape[1])
        thresholds.append(ThresholdIndex(lam, indptr, ids, mins, ops))
    return MultiIndex(general, tuple(thresholds))


def overlap_counts(g: GeneralIndex, x: SparseVector) -> dict[int, int]:
    """Number of support dims ``x`` shares with each overlapping centroid."""
    counts = np.zeros(g.n_centroids, dtype=np.int64)
    touched = np.empty(g.n_centroids, dtype=np.int64)
    nt = overlap_count_kernel(g.indptr, g.ids, x.dims, 0, x.nnz, counts, touched)
    return {int(c): int(counts[c]) for c in touched[:nt]}


def candidates(p: ThresholdIndex, x: SparseVector, counts: dict[int, int]) -> np.ndarray:
    """Sorted ids of centroids that can still reach ``dot >= p.lam`` with ``x``."""
    k = max(int(p.ids.max()) + 1 if p.ids.size else 0, max(counts, default=-1) + 1)
    dense = np.zeros(k, dtype=np.int64)
    for c, n in counts.items():
        dense[c] = n
    mark = np.zeros(k, dtype=np.bool_)
    out = np.empty(k, dtype=np.int64)
    n = candidate_kernel(p.indptr, p.ids, p.min_overlap, x.dims, 0, x.nnz, dense, mark, out)
    return np.sort(out[:n])


def select_threshold(m: MultiIndex, baseline_sim: float) -> ThresholdIndex | None:
    """Highest threshold not above ``baseline_sim`` (equality selects it)."""
    chosen = None
    for t in m.thresholds:
        if t.lam <= baseline_sim:
            chosen = t
    return chosen
