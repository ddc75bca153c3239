"""Sparse spherical k-means with exact comparison pruning."""

from sskm.corpus import (CorpusMatrix, Vocabulary, build_corpus, build_vocabulary, load_jsonl,
                         load_matrix, synthetic_corpus, tokenize, vectorize, write_matrix)
from sskm.engine import Mode, RunConfig, RunResult, run
from sskm.estimator import SphericalKMeans, TfidfUnitVectorizer
from sskm.pruneindex import MultiIndex, build_index
from sskm.sparsevec import SparseVector, dot, normalize, sq_euclidean

__all__ = [
    "CorpusMatrix", "Mode", "MultiIndex", "RunConfig", "RunResult", "SparseVector",
    "SphericalKMeans", "TfidfUnitVectorizer", "Vocabulary", "build_corpus", "build_index",
    "build_vocabulary", "dot", "load_jsonl", "load_matrix", "normalize", "run",
    "sq_euclidean", "synthetic_corpus", "tokenize", "vectorize", "write_matrix",
]
