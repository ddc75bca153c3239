"""Sparse vectors stored as sorted (dim, weight) coordinate arrays."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from sskm import _kernels

# A vector whose norm is this close to 1 is already unit length and is
# returned untouched, which makes normalize() idempotent bit for bit.
UNIT_TOL = 1e-12


class SparseVector:
    """Immutable sparse vector with strictly increasing dims and nonzero weights.

    Parameters
    ----------
    dims : array-like of int
        Dimension indices, strictly increasing.
    weights : array-like of float
        Nonzero weights aligned with ``dims``.
    n_dims : int, optional
        Total dimensionality (informational). Defaults to ``max(dims) + 1``.
    """

    __slots__ = ("dims", "weights", "n_dims")

    def __init__(self, dims, weights, n_dims: int | None = None):
        dims = np.array(dims, dtype=np.int64).reshape(-1)
        weights = np.array(weights, dtype=np.float64).reshape(-1)
        if dims.shape != weights.shape:
            raise ValueError("dims and weights must have the same length")
        if dims.size:
            if dims[0] < 0:
                raise ValueError("dims must be nonnegative")
            if np.any(np.diff(dims) <= 0):
                raise ValueError("dims must be strictly increasing")
            if np.any(weights == 0.0):
                raise ValueError("stored weights must be nonzero")
            if not np.all(np.isfinite(weights)):
                raise ValueError("weights must be finite")
        if n_dims is None:
            n_dims = int(dims[-1]) + 1 if dims.size else 0
        elif dims.size and dims[-1] >= n_dims:
            raise ValueError(f"dim {dims[-1]} out of bounds for n_dims={n_dims}")
        dims.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "n_dims", int(n_dims))

    def __setattr__(self, name, value):
        raise AttributeError("SparseVector is immutable")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]], n_dims: int | None = None):
        pairs = list(pairs)
        return cls([d for d, _ in pairs], [w for _, w in pairs], n_dims)

    @classmethod
    def from_dense(cls, values) -> SparseVector:
        values = np.asarray(values, dtype=np.float64)
        nz = np.flatnonzero(values)
        return cls(nz, values[nz], values.shape[0])

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.dims.tolist(), self.weights.tolist()))

    @property
    def nnz(self) -> int:
        return int(self.dims.shape[0])

    def norm(self) -> float:
        return math.sqrt(_kernels.sq_norm(self.weights, 0, self.nnz))

    def to_dense(self, n_dims: int | None = None) -> np.ndarray:
        out = np.zeros(self.n_dims if n_dims is None else n_dims)
        out[self.dims] = self.weights
        return out

    def __len__(self):
        return self.nnz

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (np.array_equal(self.dims, other.dims)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.dims.tobytes(), self.weights.tobytes()))

    def __repr__(self):
        shown = ", ".join(f"({d}, {w:.6g})" for d, w in self.entries[:6])
        more = ", ..." if self.nnz > 6 else ""
        return f"SparseVector([{shown}{more}], n_dims={self.n_dims})"


def dot(a: SparseVector, b: SparseVector) -> float:
    """Sum of products over the shared support (0.0 for disjoint supports)."""
    return float(_kernels.sparse_dot(a.dims, a.weights, 0, a.nnz,
                                     b.dims, b.weights, 0, b.nnz))


def sq_euclidean(a: SparseVector, b: SparseVector) -> float:
    return float(_kernels.sparse_sq_euclidean(a.dims, a.weights, 0, a.nnz,
                                              b.dims, b.weights, 0, b.nnz))


def normalize(v: SparseVector) -> SparseVector:
    """Scale ``v`` to unit Euclidean norm.

    Raises
    ------
    ValueError
        If ``v`` has no nonzero entry.
    """
    if v.nnz == 0:
        raise ValueError("cannot normalize zero vector")
    n = v.norm()
    if abs(n - 1.0) <= UNIT_TOL:
        return v
    return SparseVector(v.dims, v.weights / n, v.n_dims)


class DenseAccumulator:
    """Dense running sum of sparse vectors.

    Vectors are added in call order; callers that need reproducible bits must
    feed them in a fixed order (the engine uses ascending document index).
    """

    def __init__(self, n_dims: int):
        self.values = np.zeros(n_dims, dtype=np.float64)

    @property
    def n_dims(self) -> int:
        return self.values.shape[0]

    def add(self, v: SparseVector) -> DenseAccumulator:
        if v.nnz and v.dims[-1] >= self.n_dims:
            raise ValueError(
                f"vector dim {v.dims[-1]} exceeds accumulator size {self.n_dims}")
        # dims are unique, so fancy-index addition is safe
        self.values[v.dims] += v.weights
        return self

    def to_sparse(self) -> SparseVector:
        return SparseVector.from_dense(self.values)


def accumulate(acc: DenseAccumulator, v: SparseVector) -> DenseAccumulator:
    return acc.add(v)
