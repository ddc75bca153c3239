import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from sskm import SphericalKMeans, TfidfUnitVectorizer
from sskm.corpus import synthetic_corpus

TEXTS = [
    "apples pears apples", "pears plums apples", "plums apples pears",
    "engines gears pistons", "gears pistons oil", "oil engines gears",
    "rivers lakes rain", "rain clouds rivers",
]


@pytest.fixture(scope="module")
def corpus():
    return synthetic_corpus(300, 600, 8, seed=21)


def test_params_round_trip():
    est = SphericalKMeans(n_clusters=5, mode="ncc", random_state=3)
    params = est.get_params()
    assert params["n_clusters"] == 5 and params["mode"] == "ncc"
    assert params["lambdas"] == (0.1, 0.25, 0.4, 0.6)
    c = clone(est)
    assert c.get_params() == params
    assert c is not est


def test_fit_attributes(corpus):
    est = SphericalKMeans(n_clusters=6, random_state=0).fit(corpus)
    assert est.labels_.shape == (len(corpus),)
    assert est.cluster_centers_.shape == (6, corpus.dims)
    assert est.n_features_in_ == corpus.dims
    assert est.n_iter_ == len(est.stats_)
    assert est.stop_reason_ in {"assignments", "centroid_drift", "max_iters"}


def test_fit_predict_matches_labels(corpus):
    est = SphericalKMeans(n_clusters=6, random_state=0)
    labels = est.fit_predict(corpus.matrix)
    np.testing.assert_array_equal(labels, est.labels_)


def test_predict_is_argmax_of_transform(corpus):
    est = SphericalKMeans(n_clusters=6, random_state=1).fit(corpus.matrix)
    sims = est.transform(corpus.matrix)
    assert sims.shape == (len(corpus), 6)
    np.testing.assert_array_equal(est.predict(corpus.matrix), np.argmax(sims, axis=1))
    assert est.score(corpus.matrix) == pytest.approx(sims.max(axis=1).sum(), abs=1e-9)


def test_modes_give_same_model(corpus):
    fits = [SphericalKMeans(n_clusters=10, mode=m, random_state=4,
                            index_activation_threshold=0).fit(corpus) for m in
            ("baseline", "ncc", "ncc+index")]
    for f in fits[1:]:
        np.testing.assert_array_equal(f.labels_, fits[0].labels_)


def test_not_fitted():
    with pytest.raises(NotFittedError):
        SphericalKMeans().predict(np.eye(3))


def test_feature_mismatch(corpus):
    est = SphericalKMeans(n_clusters=3, random_state=0).fit(corpus)
    with pytest.raises(ValueError, match="features"):
        est.predict(np.eye(3))


def test_accepts_dense_unit_rows():
    X = np.array([[1.0, 0.0], [0.6, 0.8], [0.0, 1.0], [0.8, 0.6]])
    est = SphericalKMeans(n_clusters=2, random_state=0).fit(X)
    assert est.labels_[0] != est.labels_[2]


def test_rejects_bad_params(corpus):
    with pytest.raises(ValueError):
        SphericalKMeans(n_clusters=1).fit(corpus)
    with pytest.raises(ValueError, match="exceeds"):
        SphericalKMeans(n_clusters=10_000).fit(corpus)


class TestVectorizer:
    def test_vocabulary_and_rows(self):
        vec = TfidfUnitVectorizer(max_df=1.0).fit(["a b", "b c"])
        assert list(vec.get_feature_names_out()) == ["a", "b", "c"]
        X = vec.transform(["a b", "b c"])
        # "b" appears everywhere so its weight is zero
        np.testing.assert_allclose(X.toarray(), [[1, 0, 0], [0, 0, 1]], atol=1e-15)

    def test_empty_doc_is_zero_row_and_dropped(self):
        vec = TfidfUnitVectorizer(stop_words={"the"}, max_df=1.0).fit(["x y", "the", "y z"])
        assert vec.transform(["the"]).nnz == 0
        c = vec.to_corpus([("d1", "x y"), ("d2", "the"), ("d3", "y z")])
        assert c.doc_ids == ["d1", "d3"] and c.dropped == ["d2"]

    def test_pipeline(self):
        pipe = make_pipeline(TfidfUnitVectorizer(max_df=0.5),
                             SphericalKMeans(n_clusters=3, random_state=2))
        labels = pipe.fit_predict(TEXTS)
        assert len(labels) == len(TEXTS)
        assert set(labels.tolist()) <= {0, 1, 2}
        assert len(set(labels[:3].tolist())) == 1
        assert len(set(labels[3:6].tolist())) == 1
