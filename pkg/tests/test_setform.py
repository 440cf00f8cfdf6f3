import json

import pytest

from tradeoff_forge.core import validate_spec
from tradeoff_forge.errors import EmptyResult
from tradeoff_forge.setform import check_set, enumerate_sets, prune_sets, render_plan, set_matrix

TABLE1 = [
    [1, 1, 1, 1, 2, 2, 2, 2],
    [1, 1, 2, 2, 1, 1, 2, 2],
    [1, 1, 2, 2, 1, 1, 2, 2],
    [1, 2, 1, 2, 1, 2, 1, 2],
    [1, 1, 1, 1, 1, 1, 1, 1],
]


def test_table1_exact(case_spec):
    sets = enumerate_sets(case_spec)
    assert len(sets) == 8
    assert set_matrix(case_spec, sets) == TABLE1
    assert [s.set_id for s in sets] == list(range(1, 9))


def test_no_rules_gives_full_product(case_spec):
    assert len(enumerate_sets(case_spec, rules=())) == 16


def test_every_emitted_set_is_compatible(case_spec):
    all_sets = enumerate_sets(case_spec, rules=())
    kept = {tuple(sorted(s.indices().items())) for s in enumerate_sets(case_spec)}
    for s in all_sets:
        ok = not check_set(s, case_spec.rules)
        assert ok == (tuple(sorted(s.indices().items())) in kept)


def test_contradictory_rules_empty(case_raw):
    raw = json.loads(json.dumps(case_raw))
    raw["rules"] = [
        {"kind": "excludes", "antecedent": ["aml_explainable", 1], "consequent": ["aml_risk_coverage", 1]},
        {"kind": "excludes", "antecedent": ["aml_explainable", 2], "consequent": ["aml_risk_coverage", 1]},
    ]
    with pytest.raises(EmptyResult):
        enumerate_sets(validate_spec(raw))


def test_prune(case_spec):
    sets = enumerate_sets(case_spec)
    assert [s.set_id for s in prune_sets(sets, 4)] == [1, 2, 3, 4]
    ranked = prune_sets(sets, 3, {7: 2.0, 3: 2.0, 5: 1.0})
    assert [s.set_id for s in ranked] == [3, 7, 5]
    with pytest.raises(ValueError):
        prune_sets(sets, 0)


def test_render_formats(case_spec):
    sets = enumerate_sets(case_spec)
    md = render_plan(case_spec, sets, "md")
    assert md.splitlines()[0].startswith("| Legal Requirement | Set 1")
    assert "| **AML Risk Coverage** | (1) | (1)" in md
    doc = json.loads(render_plan(case_spec, sets, "json"))
    assert doc["matrix"] == TABLE1
    csv_text = render_plan(case_spec, sets, "csv")
    assert csv_text.splitlines()[1] == "Non-discrimination,1,1,1,1,2,2,2,2"
