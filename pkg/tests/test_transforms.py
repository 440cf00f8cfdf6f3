import math

import numpy as np
import pytest

from tradeoff_forge.errors import NoPositives, UnknownFeature
from tradeoff_forge.models import train_model
from tradeoff_forge.transforms import class_weights, drop_features, log_loss, minimize_data


class Proto:
    def __init__(self, epochs=60):
        self.epochs = epochs

    def fit(self, dataset):
        return train_model("logreg", dataset, hyper={"epochs": self.epochs})


def test_drop_features(small_dataset):
    out = drop_features(small_dataset, ["Gender"])
    assert out.feature("Gender").role == "excluded"
    assert "Gender" in out.frame.columns
    assert len(out.visible_features) == len(small_dataset.visible_features) - 1
    assert drop_features(small_dataset, []) is small_dataset
    with pytest.raises(UnknownFeature):
        drop_features(small_dataset, ["Shoe Size"])


def test_class_weights():
    y = np.array([0, 0, 0, 1])
    assert class_weights(y, {"policy": "fixed", "positive_weight": 5.0}).tolist() == [1, 1, 1, 5]
    assert class_weights(y, {"policy": "balanced"}).tolist() == [1, 1, 1, 3]
    with pytest.raises(NoPositives):
        class_weights(np.zeros(4, int), {"policy": "balanced"})


def test_log_loss_weighted():
    y = np.array([0, 1])
    p = np.array([0.2, 0.6])
    assert log_loss(y, p) == pytest.approx(-(math.log(0.8) + math.log(0.6)) / 2)
    w = np.array([1.0, 3.0])
    assert log_loss(y, p, sample_weight=w) == pytest.approx(-(math.log(0.8) + 3 * math.log(0.6)) / 4)


def test_minimization_contract(small_splits):
    tr, va, _ = small_splits
    sub, trace = minimize_data(tr, Proto(), -1e-7, 200, seed=1, valid=va)
    assert 0 < trace.fraction_used <= 1
    assert len(sub) == trace.sizes[-1]
    if trace.stopped_by == "threshold":
        assert trace.slope_at_stop >= -1e-7
    assert trace.slopes[:3] == [None, None, None]


def test_minimization_never_stop(small_splits):
    tr, va, _ = small_splits
    sub, trace = minimize_data(tr, Proto(20), -math.inf, 400, seed=1, valid=va)
    assert trace.fraction_used == 1.0 and len(sub) == len(tr)
    assert trace.stopped_by == "exhausted"
    assert trace.to_dict()["threshold"] == "-inf"


def test_minimization_groups_kept_whole(small_splits):
    tr, va, _ = small_splits
    groups = np.arange(len(tr)) // 10
    sub, trace = minimize_data(tr, Proto(20), -1e-3, 95, seed=2, valid=va, groups=groups)
    assert all(s % 10 == 0 for s in trace.sizes)


def test_minimization_argument_checks(small_splits):
    tr, va, _ = small_splits
    with pytest.raises(ValueError):
        minimize_data(tr, Proto(), 1e-7, 100, 0, va)
    with pytest.raises(ValueError):
        minimize_data(tr, Proto(), -1e-7, 0, 0, va)
