"""scikit-learn style front ends for the clustering engine and the TF-IDF pipeline."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from sskm import engine
from sskm.corpus import (DEFAULT_MAX_DF, CorpusMatrix, build_vocabulary, csr_arrays,
                         tokenize, vectorize)
from sskm.pruneindex import DEFAULT_LAMBDAS
from sskm.validation import check_data, check_seed, check_threads


class SphericalKMeans(ClusterMixin, TransformerMixin, BaseEstimator):
    """Spherical k-means on unit-length sparse rows.

    Parameters
    ----------
    n_clusters : int, default=8
        Number of clusters.
    mode : {"baseline", "ncc", "ncc+index"}, default="ncc+index"
        Assignment strategy. All modes return the same clustering when
        ``ncc_epsilon`` is 0; they differ in how many similarities they
        compute.
    lambdas : tuple of float, default=(0.1, 0.25, 0.4, 0.6)
        Similarity thresholds of the pruning index, strictly ascending in (0, 1).
    tol : float, default=1e-4
        Stop once no centroid moves by this much (squared Euclidean) or more.
    ncc_epsilon : float, default=0.0
        Centroids that moved by at most this much count as unchanged.
    index_activation_threshold : int, default=100
        The index is only built in iterations where more centroids changed.
    max_iter : int, default=100
        Maximum number of assignment steps.
    random_state : int or None, default=None
        Seed for k-means++ initialization.
    n_threads : int or None, default=None
        Worker threads for the assignment step. Results do not depend on it.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    cluster_centers_ : scipy.sparse.csr_matrix of shape (n_clusters, n_features)
    n_iter_ : int
    objective_ : float
        Sum of similarities between documents and their centroids.
    stats_ : list of IterationStats
    stop_reason_ : str
    """

    def __init__(self, n_clusters=8, *, mode="ncc+index", lambdas=DEFAULT_LAMBDAS, tol=1e-4,
                 ncc_epsilon=0.0, index_activation_threshold=100, max_iter=100,
                 random_state=None, n_threads=None):
        self.n_clusters = n_clusters
        self.mode = mode
        self.lambdas = lambdas
        self.tol = tol
        self.ncc_epsilon = ncc_epsilon
        self.index_activation_threshold = index_activation_threshold
        self.max_iter = max_iter
        self.random_state = random_state
        self.n_threads = n_threads

    def _config(self) -> engine.RunConfig:
        return engine.RunConfig(
            k=self.n_clusters, mode=self.mode, lambdas=tuple(self.lambdas),
            conv_sq_dist=self.tol, ncc_epsilon=self.ncc_epsilon,
            index_activation_threshold=self.index_activation_threshold,
            max_iters=self.max_iter, seed=check_seed(self.random_state))

    def fit(self, X, y=None):
        X = check_data(X)
        config = self._config()
        config.check_n_docs(X.shape[0])
        result = engine.run(X, config, n_threads=check_threads(self.n_threads))
        self.labels_ = result.assignments
        self.cluster_centers_ = result.centroids
        self.n_iter_ = result.n_iter
        self.objective_ = result.objective
        self.stats_ = result.stats
        self.stop_reason_ = result.stop_reason
        self.n_features_in_ = X.shape[1]
        return self

    def _check_features(self, X):
        X = check_data(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, but {type(self).__name__} "
                             f"was fitted with {self.n_features_in_}")
        return X

    def predict(self, X):
        """Index of the most similar centroid for every row (lowest id on ties)."""
        check_is_fitted(self, "cluster_centers_")
        X = self._check_features(X)
        state = engine.ClusteringState(np.zeros(X.shape[0], dtype=np.int64),
                                       np.zeros(X.shape[0]), self.cluster_centers_)
        labels, _, _ = engine.assign(X, state, engine.RunConfig(k=self.n_clusters,
                                                                mode="baseline"),
                                     n_threads=check_threads(self.n_threads))
        return labels

    def transform(self, X):
        """Cosine similarity of every row to every centroid, dense ``(n, k)``."""
        check_is_fitted(self, "cluster_centers_")
        X = self._check_features(X)
        return np.asarray((X @ self.cluster_centers_.T).todense())

    def score(self, X, y=None):
        """Objective of ``X`` under the fitted centroids (higher is better)."""
        X = self._check_features(X)
        return engine.objective(X, self.predict(X), self.cluster_centers_)


class TfidfUnitVectorizer(TransformerMixin, BaseEstimator):
    """Raw text to unit-length ``tf * ln(N / df)`` rows.

    Documents with no weighted in-vocabulary term become all-zero rows from
    :meth:`transform`; :meth:`to_corpus` drops them and records their ids.
    """

    def __init__(self, stop_words=None, max_df=DEFAULT_MAX_DF):
        self.stop_words = stop_words
        self.max_df = max_df

    def fit(self, raw_documents, y=None):
        docs = [tokenize(t) for t in raw_documents]
        self.vocabulary_ = build_vocabulary(docs, self.stop_words or (), self.max_df)
        return self

    def transform(self, raw_documents):
        check_is_fitted(self, "vocabulary_")
        vecs = [vectorize(tokenize(t), self.vocabulary_) for t in raw_documents]
        n_dims = len(self.vocabulary_)
        rows, cols, vals = [], [], []
        for i, v in enumerate(vecs):
            if v is not None:
                rows.append(np.full(v.nnz, i))
                cols.append(v.dims)
                vals.append(v.weights)
        if not rows:
            return sp.csr_matrix((len(vecs), n_dims))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(len(vecs), n_dims))

    def to_corpus(self, docs) -> CorpusMatrix:
        """Vectorize ``(doc_id, text)`` pairs, dropping empty documents."""
        check_is_fitted(self, "vocabulary_")
        docs = list(docs)
        m = self.transform([t for _, t in docs])
        indptr, _, _ = csr_arrays(m)
        keep = np.diff(indptr) > 0
        ids = [d for d, k in zip((i for i, _ in docs), keep) if k]
        dropped = [d for d, k in zip((i for i, _ in docs), keep) if not k]
        return CorpusMatrix(m[np.flatnonzero(keep)], ids, dropped)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "vocabulary_")
        return np.asarray([str(t) for t in self.vocabulary_.terms], dtype=object)
