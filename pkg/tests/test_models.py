import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from oracles import central_difference
from tradeoff_forge.errors import SchemaMismatch
from tradeoff_forge.models import (
    LogisticRegressionGD,
    RandomForestGini,
    TabularEncoder,
    encoder_for,
    model_to_dict,
    predict_proba,
    train_model,
)
from tradeoff_forge.transforms import drop_features


def _blobs(n=400, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(scale=0.5, size=n) > 0).astype(int)
    return X, y


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n, d = 30, 4
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, n).astype(float)
    w = rng.uniform(0.5, 5.0, n)
    params = rng.normal(size=d + 1)
    model = LogisticRegressionGD(l2=0.01)
    _, grad = model.loss_and_grad(params, X, y, w)
    num = central_difference(lambda p: model.loss_and_grad(p, X, y, w)[0], params)
    assert np.max(np.abs(grad - num) / np.maximum(np.abs(num), 1e-8)) < 1e-4


def test_logreg_learns_and_loss_decreases():
    X, y = _blobs()
    m = LogisticRegressionGD(epochs=500).fit(X, y)
    assert (m.predict(X) == y).mean() > 0.8
    assert m.loss_curve_[-1] < m.loss_curve_[0]
    assert m.get_params()["epochs"] == 500
    assert clone(m).get_params() == m.get_params()


def test_logreg_weights_shift_predictions():
    X, y = _blobs()
    lo = LogisticRegressionGD(epochs=300).fit(X, y).predict(X).sum()
    hi = LogisticRegressionGD(epochs=300).fit(X, y, sample_weight=np.where(y == 1, 5.0, 1.0))
    assert hi.predict(X).sum() > lo


def test_logreg_rejects_bad_input():
    X, y = _blobs(50)
    m = LogisticRegressionGD(epochs=5).fit(X, y)
    with pytest.raises(SchemaMismatch):
        m.predict(X[:, :2])
    with pytest.raises(ValueError):
        LogisticRegressionGD().fit(X, y, sample_weight=-np.ones(50))


def test_forest_fits_and_is_seeded():
    X, y = _blobs(300)
    a = RandomForestGini(n_trees=10, max_depth=4, random_state=3).fit(X, y)
    b = RandomForestGini(n_trees=10, max_depth=4, random_state=3).fit(X, y)
    assert np.array_equal(a.predict_proba(X), b.predict_proba(X))
    assert (a.predict(X) == y).mean() > 0.8
    p = a.predict_proba(X)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert a.to_dict()["trees"]


def test_forest_leaf_respects_min_leaf():
    X, y = _blobs(200)
    f = RandomForestGini(n_trees=3, max_depth=10, min_leaf=20, bootstrap=False).fit(X, y)
    for tree in f.trees_:
        leaves = tree.apply(X)
        counts = np.bincount(leaves)
        assert counts[counts > 0].min() >= 20


def test_encoder_top_k_and_unknown():
    frame = pd.DataFrame({"c": list("aaabbc"), "x": [1.0, 2, 3, 4, 5, 6]})
    enc = TabularEncoder(categorical=("c",), numeric=("x",), max_categories=1).fit(frame)
    out = enc.transform(pd.DataFrame({"c": ["a", "z"], "x": [1.0, 1.0]}))
    assert out.shape == (2, 3)
    with pytest.raises(SchemaMismatch):
        enc.transform(frame[["c"]])


def test_pipeline_hides_excluded(small_splits):
    tr, _, te = small_splits
    dropped = drop_features(tr, ["Gender"])
    enc = encoder_for(dropped)
    assert "Gender" not in enc.categorical
    assert "Sender Account Number" not in enc.categorical
    model = train_model("logreg", dropped, hyper={"epochs": 50})
    p = predict_proba(model, te)
    assert p.shape == (len(te),) and np.all((p >= 0) & (p <= 1))
    assert model_to_dict(model)["family"] == "logreg"
    with pytest.raises(ValueError):
        train_model("svm", dropped)
