import json
import math

import pytest

from tradeoff_forge.core import (
    RISK_SCALE,
    load_spec,
    spec_to_dict,
    validate_selection,
    validate_spec,
)
from tradeoff_forge.errors import SpecError


def _copy(raw):
    return json.loads(json.dumps(raw))


def test_case_study_loads(case_spec):
    assert [r.id for r in case_spec.requirements] == [
        "non_discrimination", "data_minimization", "personal_data", "aml_explainable",
        "aml_risk_coverage"]
    assert len(case_spec.operationalizations) == 9
    assert case_spec.op("non_discrimination", 2).includes == (1,)
    assert case_spec.hyper["forest"]["n_trees"] == 200


def test_round_trip(case_spec):
    again = validate_spec(spec_to_dict(case_spec))
    assert spec_to_dict(again) == spec_to_dict(case_spec)


def test_unknown_requirement_has_field_path(case_raw):
    raw = _copy(case_raw)
    raw["operationalizations"][0]["requirement"] = "foo"
    with pytest.raises(SpecError) as err:
        validate_spec(raw)
    assert "operationalizations[0].requirement" in str(err.value)
    assert "unknown requirement 'foo'" in str(err.value)


def test_k_below_two_rejected(case_raw):
    raw = _copy(case_raw)
    raw["operationalizations"][3]["params"]["k"] = 1
    with pytest.raises(SpecError, match="params.k must be ≥ 2"):
        validate_spec(raw)


def test_missing_indices_filled_sequentially():
    raw = {
        "requirements": [{"id": "r", "evaluation": "recall"}],
        "operationalizations": [
            {"requirement": "r", "kind": "model-family", "params": {"family": "logreg"}},
            {"requirement": "r", "kind": "model-family", "params": {"family": "forest"}},
        ],
    }
    spec = validate_spec(raw)
    assert [op.index for op in spec.operationalizations] == [1, 2]
    assert spec.operationalizations[1].id == "r:2"


@pytest.mark.parametrize("mutate, path", [
    (lambda r: r.__setitem__("split", [0.5, 0.2, 0.2]), "split"),
    (lambda r: r.__setitem__("seed", -1), "seed"),
    (lambda r: r.__setitem__("strata_features", []), "strata_features"),
    (lambda r: r["requirements"].append(dict(r["requirements"][0])), "requirements[5].id"),
    (lambda r: r["rules"].append({"kind": "excludes", "antecedent": ["data_minimization", 2],
                                  "consequent": ["personal_data", 2]}), "rules"),
])
def test_invalid_specs(case_raw, mutate, path):
    raw = _copy(case_raw)
    mutate(raw)
    with pytest.raises(SpecError) as err:
        validate_spec(raw)
    assert err.value.path.startswith(path)


def test_never_stop_sentinel(case_raw):
    raw = _copy(case_raw)
    raw["operationalizations"][2]["params"]["stopping_threshold"] = "never"
    spec = validate_spec(raw)
    assert spec.op("data_minimization", 1).params["stopping_threshold"] == "-inf"


def test_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json", encoding="utf-8")
    with pytest.raises(SpecError):
        load_spec(p)


def test_selection_validation():
    policy = validate_selection({
        "thresholds": [{"dimension": "risk_category", "op": "in", "value": ["Very Low", "Low"]}],
        "ranking": {"rule": "weighted", "weights": {"accuracy": 1.0}},
    })
    assert policy.thresholds[0].value == ("Very Low", "Low")
    with pytest.raises(SpecError, match="unknown dimension"):
        validate_selection({"thresholds": [{"dimension": "speed", "op": ">=", "value": 1}]})
    with pytest.raises(SpecError, match="all be zero"):
        validate_selection({"ranking": {"rule": "weighted", "weights": {"accuracy": 0}}})
    assert RISK_SCALE[0] == "Very Low"
    assert not math.isnan(policy.cdd_soft_limit)
