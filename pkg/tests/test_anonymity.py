import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tradeoff_forge.anonymity import (
    MondrianAnonymizer,
    fit_anonymizer,
    group_label,
    interval_label,
    k_anonymize,
    verify_k_anonymity,
)
from tradeoff_forge.data import DEFAULT_QUASI_IDENTIFIERS
from tradeoff_forge.errors import InfeasibleK, UnknownFeature


def test_labels():
    assert group_label(["b", "a"]) == "{a|b}"
    assert group_label(["x"]) == "x"
    assert group_label(list("abcd")).startswith("group-4-")
    assert interval_label(3.0, 3.0) == "3"
    assert interval_label(1.5, 2.0) == "[1.5, 2]"


@pytest.mark.parametrize("k", [2, 5, 7])
def test_k_anonymous_and_shape_preserved(small_dataset, k):
    out, genmap = k_anonymize(small_dataset, DEFAULT_QUASI_IDENTIFIERS, k)
    assert verify_k_anonymity(out, DEFAULT_QUASI_IDENTIFIERS) >= k
    assert len(out) == len(small_dataset)
    assert np.array_equal(out.labels, small_dataset.labels)
    assert min(p["size"] for p in genmap["partitions"]) >= k
    assert out.feature("Amount").kind == "categorical"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 9), st.integers(20, 120))
def test_random_frames_k_anonymous(seed, k, n):
    rng = np.random.default_rng(seed)
    frame = pd.DataFrame({
        "a": rng.integers(0, 5, n).astype(float),
        "b": rng.choice(list("pqrstu"), n),
        "c": rng.normal(size=n),
    })
    anon = MondrianAnonymizer(("a", "b", "c"), k, numeric=("a", "c")).fit(frame)
    assert verify_k_anonymity(anon.transform(frame), ["a", "b", "c"]) >= k


def test_held_out_rows_use_train_partition(small_splits):
    tr, _, te = small_splits
    anon = fit_anonymizer(tr, ["Amount", "Profession"], 5)
    leaves = anon.apply(te.frame)
    assert leaves.min() >= 0 and leaves.max() < len(anon.leaf_labels_)
    extreme = te.frame.head(2).copy()
    extreme["Amount"] = [-1e9, 1e12]
    extreme["Profession"] = "Astronaut"
    anon.transform(extreme)


def test_errors(small_dataset):
    with pytest.raises(InfeasibleK):
        k_anonymize(small_dataset.take(np.arange(3)), ["Amount"], 7)
    with pytest.raises(UnknownFeature):
        k_anonymize(small_dataset, ["Height"], 2)
    with pytest.raises(ValueError):
        k_anonymize(small_dataset, ["Amount"], 1)
