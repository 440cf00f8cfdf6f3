import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cdd_bruteforce
from tradeoff_forge.core import OperationalizationSet
from tradeoff_forge.errors import LengthMismatch, NoProtectedVariation
from tradeoff_forge.metrics import (
    ConfusionCounts,
    applies_k_anonymity,
    cdd,
    confusion,
    data_usage,
    explainability_category,
    perf_panel,
    quantile_bins,
    risk_category,
    strata_keys,
)
from tradeoff_forge.setform import enumerate_sets


def test_hand_case():
    # stratum of 10: 6 adverse (4 in group), 4 favorable (2 in group)
    pred = [1] * 6 + [0] * 4
    prot = ["F"] * 4 + ["M"] * 2 + ["F"] * 2 + ["M"] * 2
    res = cdd(pred, prot, ["s"] * 10, "F")
    assert res.cdd == pytest.approx(4 / 6 - 2 / 4, abs=1e-15)
    assert res.strata[0].dd == 4 / 6 - 2 / 4


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000))
def test_cdd_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 1000))
    pred = rng.integers(0, 2, n)
    prot = rng.choice(["F", "M"], n)
    strata = rng.integers(0, int(rng.integers(2, 21)), n).astype(str)
    got = cdd(pred, prot, strata, "F").cdd
    assert abs(got - cdd_bruteforce(pred, prot, strata, "F")) < 1e-9


def test_cdd_edge_cases():
    res = cdd([1, 1, 0, 0], ["F", "M", "F", "M"], ["a", "a", "b", "b"], "F")
    assert res.cdd == 0.0 and set(res.flagged) == {"a", "b"}
    with pytest.raises(NoProtectedVariation):
        cdd([1, 0], ["F", "F"], ["a", "a"])
    with pytest.raises(LengthMismatch):
        cdd([1, 0], ["F"], ["a", "a"])
    res = cdd([1, 0, 1, 0], ["F", None, "M", "F"], ["a"] * 4, "F")
    assert res.n == 3


def test_confusion_and_panel():
    c = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert c == ConfusionCounts(tp=2, fp=1, tn=1, fn=1)
    p = perf_panel(c)
    assert p["accuracy"] == 3 / 5 and p["precision"] == 2 / 3 and p["recall"] == 2 / 3
    empty = perf_panel(confusion([0, 0], [0, 0]))
    assert set(empty["undefined"]) == {"precision", "recall", "f1"}
    with pytest.raises(LengthMismatch):
        confusion([1], [1, 0])


def test_strata_and_bins(small_dataset):
    bins = quantile_bins(np.arange(100), 5)
    assert np.bincount(bins).tolist() == [20] * 5
    keys = strata_keys(small_dataset.frame, ["Source of Wealth Industry", "Total Estimated Assets"],
                       {"Total Estimated Assets"})
    assert all(" | Total Estimated Assets:Q" in k for k in keys)


def test_data_usage_rounding():
    assert data_usage(0.838) == ("84%", 83.8)
    assert data_usage(0.705)[0] == "71%"
    assert data_usage(1.0)[0] == "100%"


def test_categories(case_spec):
    sets = {s.set_id: s for s in enumerate_sets(case_spec)}
    for sid in (3, 4, 7, 8):
        assert applies_k_anonymity(sets[sid], case_spec)
        assert risk_category(sets[sid], case_spec)[0] == "Very Low"
    for sid in (1, 2, 5, 6):
        assert risk_category(sets[sid], case_spec)[0] == "Low"
        assert risk_category(sets[sid], case_spec, shared_externally=True)[0] == "Moderate"
    assert risk_category(sets[1], case_spec, override="High") == ("High", "override")
    assert explainability_category("logreg") == "Moderate"
    assert explainability_category("forest") == "High"
    assert not applies_k_anonymity(OperationalizationSet(9, {}))
