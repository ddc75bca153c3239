"""Spherical k-means with exact comparison skipping.

Three assignment modes share one loop:

* ``baseline`` scans all k centroids for every document.
* ``ncc`` skips centroids that did not change since the previous iteration
  when the document's own centroid did not change either; its cached
  similarity already beats every unchanged centroid.
* ``ncc+index`` additionally asks a threshold index (see
  :mod:`sskm.pruneindex`) which centroids can reach the document's current
  similarity, once enough centroids changed to make building it worthwhile.

Ties go to the lowest cluster id in every mode, so all three produce the same
assignments as long as ``ncc_epsilon`` is 0.
"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

from sskm import _kernels
from sskm.corpus import csr_arrays
from sskm.pruneindex import (DEFAULT_LAMBDAS, MultiIndex, build_index, candidate_kernel,
                             check_lambdas, overlap_count_kernel)
from sskm.sparsevec import UNIT_TOL
from sskm.validation import check_data, check_seed, check_threads


class Mode(str, enum.Enum):
    BASELINE = "baseline"
    NCC = "ncc"
    NCC_INDEX = "ncc+index"

    @classmethod
    def parse(cls, value) -> Mode:
        if isinstance(value, Mode):
            return value
        key = str(value).strip().lower().replace("_", "+")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"unknown mode {value!r}; expected one of "
                         f"{', '.join(m.value for m in cls)}")


@dataclass
class RunConfig:
    k: int
    mode: Mode = Mode.NCC_INDEX
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    conv_sq_dist: float = 1e-4
    ncc_epsilon: float = 0.0
    index_activation_threshold: int = 100
    max_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        self.mode = Mode.parse(self.mode)
        self.lambdas = tuple(float(x) for x in check_lambdas(self.lambdas))
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if not self.conv_sq_dist > 0:
            raise ValueError("conv_sq_dist must be positive")
        if not self.ncc_epsilon >= 0:
            raise ValueError("ncc_epsilon must be nonnegative")
        if self.index_activation_threshold < 0:
            raise ValueError("index_activation_threshold must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        self.seed = check_seed(self.seed)

    def check_n_docs(self, n_docs: int) -> None:
        if self.k > n_docs:
            raise ValueError(f"k={self.k} exceeds the number of documents ({n_docs})")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mode"] = self.mode.value
        out["lambdas"] = list(self.lambdas)
        return out


@dataclass
class IterationStats:
    iteration: int
    n_reassigned: int = 0
    n_unchanged_centroids: int = 0
    dot_products: int = 0
    index_queries: int = 0
    candidates_total: int = 0
    index_active: bool = False
    index_build_seconds: float = 0.0
    wall_time: float = 0.0
    objective: float = 0.0
    max_drift: float = float("nan")


@dataclass
class ClusteringState:
    assignments: np.ndarray
    sims: np.ndarray
    centroids: sp.csr_matrix
    prev_centroids: sp.csr_matrix | None = None
    # boolean mask over clusters; the C_u set of unchanged centroids
    unchanged: np.ndarray | None = None
    iteration: int = 0


@dataclass
class RunResult:
    assignments: np.ndarray
    centroids: sp.csr_matrix
    stats: list[IterationStats]
    objective: float
    seeds: np.ndarray
    stop_reason: str
    history: list[np.ndarray] = field(default_factory=list)

    @property
    def n_iter(self) -> int:
        return len(self.stats)

    @property
    def total_dot_products(self) -> int:
        return sum(s.dot_products for s in self.stats)


# -- compiled pieces ---------------------------------------------------------

@njit(nogil=True, cache=True)
def _dots_to_row(x_indptr, x_indices, x_data, row, out):
    r0 = x_indptr[row]
    r1 = x_indptr[row + 1]
    for i in range(out.shape[0]):
        out[i] = _kernels.sparse_dot(x_indices, x_data, x_indptr[i], x_indptr[i + 1],
                                     x_indices, x_data, r0, r1)


@njit(nogil=True, cache=True)
def _normalize_rows(indptr, data, tol):
    out = data.copy()
    for j in range(indptr.shape[0] - 1):
        n = np.sqrt(_kernels.sq_norm(data, indptr[j], indptr[j + 1]))
        if abs(n - 1.0) > tol:
            for p in range(indptr[j], indptr[j + 1]):
                out[p] = data[p] / n
    return out


@njit(nogil=True, cache=True)
def _drift(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data):
    k = a_indptr.shape[0] - 1
    out = np.empty(k)
    for j in range(k):
        out[j] = _kernels.sparse_sq_euclidean(a_indices, a_data, a_indptr[j], a_indptr[j + 1],
                                              b_indices, b_data, b_indptr[j], b_indptr[j + 1])
    return out


@njit(nogil=True, cache=True)
def _identical_rows(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data):
    k = a_indptr.shape[0] - 1
    out = np.zeros(k, dtype=np.bool_)
    for j in range(k):
        a0 = a_indptr[j]
        b0 = b_indptr[j]
        n = a_indptr[j + 1] - a0
        if b_indptr[j + 1] - b0 != n:
            continue
        same = True
        for t in range(n):
            if a_indices[a0 + t] != b_indices[b0 + t] or a_data[a0 + t] != b_data[b0 + t]:
                same = False
                break
        out[j] = same
    return out


@njit(nogil=True, cache=True)
def _assign_rows(lo, hi, x_indptr, x_indices, x_data,
                 c_indptr, c_indices, c_data,
                 prev_assign, prev_sims, changed, changed_ids, full_scan,
                 g_indptr, g_ids, lams, p_indptr, p_ids, p_min,
                 new_assign, new_sims):
    k = c_indptr.shape[0] - 1
    counts = np.zeros(k, dtype=np.int64)
    touched = np.empty(k, dtype=np.int64)
    mark = np.zeros(k, dtype=np.bool_)
    cand = np.empty(k, dtype=np.int64)
    n_dots = 0
    n_queries = 0
    n_cand = 0
    for i in range(lo, hi):
        x0 = x_indptr[i]
        x1 = x_indptr[i + 1]
        if full_scan:
            best = -np.inf
            bj = 0
            for j in range(k):
                s = _kernels.sparse_dot(x_indices, x_data, x0, x1,
                                        c_indices, c_data, c_indptr[j], c_indptr[j + 1])
                if s > best:
                    best = s
                    bj = j
            n_dots += k
            new_assign[i] = bj
            new_sims[i] = best
            continue

        a = prev_assign[i]
        kept = not changed[a]
        if kept:
            # a beat every unchanged centroid last time, ties included
            best = prev_sims[i]
        else:
            best = _kernels.sparse_dot(x_indices, x_data, x0, x1,
                                       c_indices, c_data, c_indptr[a], c_indptr[a + 1])
            n_dots += 1
        bj = a

        level = -1
        for t in range(lams.shape[0]):
            if lams[t] <= best:
                level = t

        if level >= 0:
            n_queries += 1
            nt = overlap_count_kernel(g_indptr, g_ids, x_indices, x0, x1, counts, touched)
            nc = candidate_kernel(p_indptr[level], p_ids, p_min, x_indices, x0, x1,
                                  counts, mark, cand)
            for t in range(nt):
                counts[touched[t]] = 0
            n_cand += nc
            for t in range(nc):
                j = cand[t]
                if j == a or (kept and not changed[j]):
                    continue
                s = _kernels.sparse_dot(x_indices, x_data, x0, x1,
                                        c_indices, c_data, c_indptr[j], c_indptr[j + 1])
                n_dots += 1
                if s > best or (s == best and j < bj):
                    best = s
                    bj = j
        elif kept:
            for t in range(changed_ids.shape[0]):
                j = changed_ids[t]
                s = _kernels.sparse_dot(x_indices, x_data, x0, x1,
                                        c_indices, c_data, c_indptr[j], c_indptr[j + 1])
                n_dots += 1
                if s > best or (s == best and j < bj):
                    best = s
                    bj = j
        else:
            for j in range(k):
                if j == a:
                    continue
                s = _kernels.sparse_dot(x_indices, x_data, x0, x1,
                                        c_indices, c_data, c_indptr[j], c_indptr[j + 1])
                n_dots += 1
                if s > best or (s == best and j < bj):
                    best = s
                    bj = j
        new_assign[i] = bj
        new_sims[i] = best
    return n_dots, n_queries, n_cand


_NO_LAMS = np.empty(0, dtype=np.float64)
_NO_P_INDPTR = np.zeros((0, 1), dtype=np.int64)
_NO_IDS = np.empty(0, dtype=np.int64)
_NO_G_INDPTR = np.zeros(1, dtype=np.int64)


def _as_data(data) -> sp.csr_matrix:
    # already-validated CSR (as produced by check_data) passes straight through
    if sp.isspmatrix_csr(data) and data.has_sorted_indices and data.dtype == np.float64:
        return data
    return check_data(data)


def _chunks(n: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n, max(1, min(parts, n)) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


# -- operations ---------------------------------------------------------------

def init_kmeanspp(data, k: int, seed: int) -> np.ndarray:
    """k-means++ seeding with cosine distance ``1 - sim``.

    The first seed is uniform; each further seed is drawn with probability
    proportional to the squared distance to the closest chosen seed. Returns
    k distinct row indices.
    """
    X = check_data(data)
    n = X.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the number of documents ({n})")
    rng = np.random.default_rng(seed)
    indptr, indices, values = csr_arrays(X)
    chosen = np.zeros(n, dtype=bool)
    seeds = [int(rng.integers(n))]
    chosen[seeds[0]] = True
    best = np.full(n, -np.inf)
    sims = np.empty(n)
    while len(seeds) < k:
        _dots_to_row(indptr, indices, values, seeds[-1], sims)
        np.maximum(best, sims, out=best)
        dist = np.clip(1.0 - best, 0.0, None)
        weights = dist * dist
        weights[chosen] = 0.0
        cdf = np.cumsum(weights)
        if cdf[-1] > 0.0:
            nxt = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        else:
            free = np.flatnonzero(~chosen)
            nxt = int(free[rng.integers(free.size)])
        seeds.append(nxt)
        chosen[nxt] = True
    return np.array(seeds, dtype=np.int64)


def _repair_empty(assignments: np.ndarray, sims: np.ndarray | None, k: int):
    """Give each empty cluster the worst-fitting document of a non-singleton cluster."""
    sizes = np.bincount(assignments, minlength=k)
    empty = np.flatnonzero(sizes == 0)
    if not empty.size:
        return assignments, empty
    assignments = assignments.copy()
    n = assignments.shape[0]
    key = np.zeros(n) if sims is None else sims
    order = np.lexsort((np.arange(n), key))
    pos = 0
    for j in empty.tolist():
        while sizes[assignments[order[pos]]] < 2:
            pos += 1
        i = order[pos]
        sizes[assignments[i]] -= 1
        assignments[i] = j
        sizes[j] = 1
        pos += 1
    return assignments, empty


def compute_centroids(data, assignments, k: int, sims=None):
    """Normalized member sums, accumulated in ascending document order.

    Empty clusters are first repaired (see :func:`_repair_empty`). Returns
    ``(centroids, assignments, repaired_cluster_ids)``; ``assignments`` is a
    new array when a repair moved documents.
    """
    X = _as_data(data)
    assignments = np.asarray(assignments, dtype=np.int64)
    if assignments.shape[0] != X.shape[0]:
        raise ValueError("one assignment per document is required")
    if assignments.size and (assignments.min() < 0 or assignments.max() >= k):
        raise ValueError(f"assignments must lie in [0, {k})")
    assignments, repaired = _repair_empty(assignments, sims, k)
    order = np.argsort(assignments, kind="stable").astype(np.int64)
    bounds = np.zeros(k + 1, dtype=np.int64)
    bounds[1:] = np.cumsum(np.bincount(assignments, minlength=k))
    indptr, indices, values = csr_arrays(X)
    c_indptr, c_indices, c_data = _kernels.centroid_sums(indptr, indices, values, order,
                                                          bounds, X.shape[1])
    c_data = _normalize_rows(c_indptr, c_data, UNIT_TOL)
    centroids = sp.csr_matrix((c_data, c_indices, c_indptr), shape=(k, X.shape[1]))
    return centroids, assignments, repaired


def centroid_drift(prev: sp.csr_matrix, new: sp.csr_matrix) -> np.ndarray:
    """Squared Euclidean distance between matching rows."""
    return _drift(*csr_arrays(prev), *csr_arrays(new))


def detect_unchanged(prev_centroids: sp.csr_matrix, centroids: sp.csr_matrix,
                     ncc_epsilon: float = 0.0) -> np.ndarray:
    """Boolean mask of clusters whose centroid moved by at most ``ncc_epsilon``.

    With ``ncc_epsilon == 0`` this requires the same support and bitwise-equal
    weights.
    """
    if prev_centroids.shape != centroids.shape:
        raise ValueError("centroid snapshots must have the same shape")
    if ncc_epsilon == 0.0:
        return _identical_rows(*csr_arrays(prev_centroids), *csr_arrays(centroids))
    return centroid_drift(prev_centroids, centroids) <= ncc_epsilon


def assign(data, state: ClusteringState, config: RunConfig,
           index: MultiIndex | None = None, n_threads: int = 1):
    """One assignment step.

    Returns ``(assignments, sims, stats)``. The first step (no previous
    assignments) and every ``baseline`` step scan all centroids. ``index`` is
    only consulted in ``ncc+index`` mode while more than
    ``index_activation_threshold`` centroids changed; it is built here when
    needed and not supplied.
    """
    X = _as_data(data)
    n = X.shape[0]
    k = state.centroids.shape[0]
    stats = IterationStats(iteration=state.iteration + 1)
    full_scan = config.mode is Mode.BASELINE or state.iteration == 0
    if full_scan:
        prev_assign = np.zeros(n, dtype=np.int64)
        prev_sims = np.zeros(n)
        changed = np.ones(k, dtype=bool)
    else:
        prev_assign = np.asarray(state.assignments, dtype=np.int64)
        prev_sims = np.asarray(state.sims, dtype=np.float64)
        if config.mode is Mode.BASELINE or state.unchanged is None:
            changed = np.ones(k, dtype=bool)
        else:
            changed = ~np.asarray(state.unchanged, dtype=bool)
    changed_ids = np.flatnonzero(changed).astype(np.int64)
    stats.n_unchanged_centroids = int(k - changed_ids.size)

    g_indptr, g_ids = _NO_G_INDPTR, _NO_IDS
    lams, p_indptr, p_ids, p_min = _NO_LAMS, _NO_P_INDPTR, _NO_IDS, _NO_IDS
    if (not full_scan and config.mode is Mode.NCC_INDEX
            and changed_ids.size > config.index_activation_threshold):
        if index is None:
            t0 = time.perf_counter()
            index = build_index(state.centroids, config.lambdas, check_unit=False)
            stats.index_build_seconds = time.perf_counter() - t0
        stats.index_active = True
        g_indptr, g_ids = index.general.indptr, index.general.ids
        lams, p_indptr, p_ids, p_min = index.stacked()

    x_arrays = csr_arrays(X)
    c_arrays = csr_arrays(state.centroids)
    new_assign = np.empty(n, dtype=np.int64)
    new_sims = np.empty(n, dtype=np.float64)

    def work(bounds):
        lo, hi = bounds
        return _assign_rows(lo, hi, *x_arrays, *c_arrays, prev_assign, prev_sims,
                            changed, changed_ids, full_scan,
                            g_indptr, g_ids, lams, p_indptr, p_ids, p_min,
                            new_assign, new_sims)

    chunks = _chunks(n, n_threads)
    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    stats.dot_products = int(sum(p[0] for p in parts))
    stats.index_queries = int(sum(p[1] for p in parts))
    stats.candidates_total = int(sum(p[2] for p in parts))
    if state.iteration == 0:
        stats.n_reassigned = n
    else:
        stats.n_reassigned = int(np.count_nonzero(new_assign != state.assignments))
    stats.objective = float(np.cumsum(new_sims)[-1])
    return new_assign, new_sims, stats


def objective(data, assignments, centroids: sp.csr_matrix) -> float:
    """Sum over documents of the similarity to their assigned centroid."""
    X = _as_data(data)
    xi, xind, xd = csr_arrays(X)
    ci, cind, cd = csr_arrays(centroids)
    total = 0.0
    for i, j in enumerate(np.asarray(assignments).tolist()):
        total += _kernels.sparse_dot(xind, xd, xi[i], xi[i + 1], cind, cd, ci[j], ci[j + 1])
    return float(total)


def run(data, config: RunConfig, n_threads: int = 1, record_history: bool = False) -> RunResult:
    """Cluster ``data`` until assignments or centroids settle.

    Stops when an assignment step moves no document, when every centroid
    moved by less than ``conv_sq_dist`` (squared Euclidean), or after
    ``max_iters`` assignment steps.
    """
    X = check_data(data)
    config.check_n_docs(X.shape[0])
    n_threads = check_threads(n_threads)
    k = config.k
    seeds = init_kmeanspp(X, k, config.seed)
    centroids = X[seeds]
    state = ClusteringState(np.full(X.shape[0], -1, dtype=np.int64), np.zeros(X.shape[0]),
                            centroids)
    history = []
    stats_log = []

    t0 = time.perf_counter()
    state.assignments, state.sims, stats = assign(X, state, config, n_threads=n_threads)
    stats.wall_time = time.perf_counter() - t0
    state.iteration = 1
    stats_log.append(stats)
    if record_history:
        history.append(state.assignments.copy())

    stop_reason = "max_iters"
    while True:
        t0 = time.perf_counter()
        new_c, assignments, repaired = compute_centroids(X, state.assignments, k, state.sims)
        unchanged = detect_unchanged(state.centroids, new_c, config.ncc_epsilon)
        unchanged[repaired] = False
        drift = float(centroid_drift(state.centroids, new_c).max())
        stats_log[-1].max_drift = drift
        state.prev_centroids, state.centroids = state.centroids, new_c
        state.assignments = assignments
        state.unchanged = unchanged
        if drift < config.conv_sq_dist:
            stop_reason = "centroid_drift"
            break
        if state.iteration >= config.max_iters:
            break
        new_assign, new_sims, stats = assign(X, state, config, n_threads=n_threads)
        stats.wall_time = time.perf_counter() - t0
        state.assignments, state.sims = new_assign, new_sims
        state.iteration += 1
        stats_log.append(stats)
        if record_history:
            history.append(new_assign.copy())
        if stats.n_reassigned == 0:
            stop_reason = "assignments"
            break

    return RunResult(state.assignments, state.centroids, stats_log,
                     objective(X, state.assignments, state.centroids), seeds,
                     stop_reason, history)
