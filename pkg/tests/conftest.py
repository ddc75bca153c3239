import numpy as np
import pytest
from hypothesis import strategies as st

from sskm.sparsevec import SparseVector, normalize


def random_unit(rng, n_dims, nnz, nonneg=True):
    dims = np.sort(rng.choice(n_dims, size=nnz, replace=False))
    w = rng.random(nnz) + 1e-3
    if not nonneg:
        w *= rng.choice([-1.0, 1.0], size=nnz)
    return normalize(SparseVector(dims, w, n_dims))


def skewed_unit(rng, n_dims, nnz):
    """Unit vector with a few dominant weights, like a real centroid."""
    dims = np.sort(rng.choice(n_dims, size=nnz, replace=False))
    w = rng.pareto(1.5, size=nnz) + 1e-3
    return normalize(SparseVector(dims, w, n_dims))


@st.composite
def sparse_vectors(draw, max_dims=40, min_nnz=1, max_nnz=12, unit=True):
    n_dims = draw(st.integers(max(min_nnz, 1), max_dims))
    nnz = draw(st.integers(min_nnz, min(max_nnz, n_dims)))
    dims = sorted(draw(st.sets(st.integers(0, n_dims - 1), min_size=nnz, max_size=nnz)))
    weights = draw(st.lists(
        st.floats(-10, 10, allow_nan=False).filter(lambda w: abs(w) > 1e-3),
        min_size=nnz, max_size=nnz))
    v = SparseVector(dims, weights, n_dims)
    return normalize(v) if unit and nnz else v


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
