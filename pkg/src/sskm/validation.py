"""Input checks shared by the engine, the estimator and the CLI."""

from __future__ import annotations

import numbers

import numpy as np
import scipy.sparse as sp
from sklearn.utils.validation import check_array

from sskm import _kernels
from sskm.corpus import CorpusMatrix, as_csr, csr_arrays
from sskm.sparsevec import SparseVector

ROW_UNIT_TOL = 1e-6


def check_data(X, unit_tol: float = ROW_UNIT_TOL) -> sp.csr_matrix:
    """Coerce ``X`` to float64 CSR and require unit-length rows.

    Accepts a :class:`CorpusMatrix`, a scipy sparse matrix, a dense 2-D array
    or a sequence of :class:`SparseVector`.
    """
    if isinstance(X, CorpusMatrix):
        m = X.matrix
    elif isinstance(X, (list, tuple)) and X and isinstance(X[0], SparseVector):
        m = CorpusMatrix.from_vectors(X).matrix
    else:
        m = check_array(X, accept_sparse="csr", dtype=np.float64)
        m = sp.csr_matrix(m) if not sp.issparse(m) else m
    m = as_csr(m)
    m.eliminate_zeros()
    if m.shape[0] == 0:
        raise ValueError("no documents to cluster")
    indptr, _, data = csr_arrays(m)
    norms = np.sqrt(np.array([_kernels.sq_norm(data, indptr[i], indptr[i + 1])
                              for i in range(m.shape[0])]))
    bad = np.flatnonzero(np.abs(norms - 1.0) > unit_tol)
    if bad.size:
        raise ValueError(f"row {bad[0]} is not unit length (norm {norms[bad[0]]!r}); "
                         "normalize the input first")
    return m


def check_seed(seed) -> int:
    if seed is None:
        return int(np.random.SeedSequence().entropy % (1 << 63))
    if isinstance(seed, numbers.Integral) and not isinstance(seed, bool):
        return int(seed)
    raise ValueError(f"seed must be an integer or None, got {seed!r}")


def check_threads(n_threads) -> int:
    if n_threads is None:
        return 1
    if not isinstance(n_threads, numbers.Integral) or n_threads < 1:
        raise ValueError(f"n_threads must be a positive integer, got {n_threads!r}")
    return int(n_threads)
