import dataclasses
import json

import pytest

from conftest import fast_spec_raw
from tradeoff_forge.core import Operationalization, validate_spec
from tradeoff_forge.errors import SpecError
from tradeoff_forge.pipeline import execute_run, execute_set, load_run, set_seed
from tradeoff_forge.report import render_report
from tradeoff_forge.setform import enumerate_sets
from tradeoff_forge.trademap import build_table, select


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, fast_spec, small_dataset):
    out = tmp_path_factory.mktemp("runs")
    run = execute_run(fast_spec, small_dataset, out=out)
    return run


def test_eight_records_with_reference_categories(run_dir):
    recs = {r.set_id: r for r in run_dir.records}
    assert sorted(recs) == list(range(1, 9))
    for sid, r in recs.items():
        assert r.ok, r.notes
        kanon = sid in (3, 4, 7, 8)
        assert r.k_anon is kanon
        assert r.risk_category == ("Very Low" if kanon else "Low")
        assert r.explainability_category == ("Moderate" if sid % 2 else "High")
        assert 0 < r.data_used_pct <= 100
        if kanon:
            assert r.k_min_class >= 7


def test_artifact_layout(run_dir):
    d = run_dir.directory
    for name in ("spec.snapshot", "tradeoff.csv", "tradeoff.md", "tradeoff.json", "report.md",
                 "index.json"):
        assert (d / name).is_file()
    assert {p.name for p in (d / "sets" / "3").iterdir()} == {
        "model.json", "metrics.json", "trace.json", "genmap.json"}
    assert not (d / "sets" / "1" / "genmap.json").exists()
    metrics = json.loads((d / "sets" / "5" / "metrics.json").read_text())
    assert metrics["reject_option"]["theta"] >= 0.5
    assert metrics["cdd"]["strata"]
    index = json.loads((d / "index.json").read_text())
    assert index["set_seeds"]["3"] == set_seed(index["seed"], 3)
    assert str(d.parent) not in (d / "report.md").read_text()


def test_genmap_fit_on_train_only(run_dir, small_splits):
    genmap = json.loads((run_dir.directory / "sets" / "3" / "genmap.json").read_text())
    assert sum(p["size"] for p in genmap["partitions"]) == len(small_splits[0])
    assert "Gender" not in genmap["quasi_identifiers"]


def test_snapshot_round_trips(run_dir, fast_spec):
    loaded = load_run(run_dir.directory)
    assert loaded.spec == fast_spec


def test_report_regenerates_byte_identical(run_dir):
    loaded = load_run(run_dir.directory)
    text = render_report(select(loaded.records, loaded.spec.selection), build_table(loaded.records),
                         loaded.spec, loaded.metrics)
    assert text == (run_dir.directory / "report.md").read_text(encoding="utf-8")
    assert text.count("\n### ") == 5
    assert "## Risks not evaluated" in text


def test_rerun_identical(run_dir, fast_spec, small_dataset, tmp_path):
    again = execute_run(fast_spec, small_dataset, out=tmp_path)
    assert again.run_id == run_dir.run_id
    for name in ("tradeoff.csv", "report.md"):
        assert (again.directory / name).read_bytes() == (run_dir.directory / name).read_bytes()


def test_prune(case_raw, small_dataset):
    raw = fast_spec_raw(case_raw)
    raw["prune"] = {"max_count": 4}
    run = execute_run(validate_spec(raw), small_dataset)
    assert [r.set_id for r in run.records] == [1, 2, 3, 4]


def test_unimplemented_kind_fails_one_set(fast_spec, small_splits):
    sets = enumerate_sets(fast_spec)
    bogus = Operationalization("x", "aml_risk_coverage", 1, "bogus", {}, "", ())
    opset = dataclasses.replace(sets[0], choices={**sets[0].choices, "aml_risk_coverage": bogus})
    result = execute_set(opset, small_splits, fast_spec)
    assert result.record.status == "failed"
    assert "set 1" in result.record.notes[0] and "bogus" in result.record.notes[0]


def test_minimize_first_order(case_raw, small_splits):
    raw = fast_spec_raw(case_raw)
    raw["transform_order"] = "minimize-first"
    spec = validate_spec(raw)
    rec = execute_set(enumerate_sets(spec)[2], small_splits, spec).record
    assert rec.ok and rec.k_anon and rec.k_min_class >= 7


def test_invalid_dataset_aborts(fast_spec, small_dataset):
    broken = dataclasses.replace(small_dataset, frame=small_dataset.frame.drop(columns=["Gender"]))
    with pytest.raises(SpecError):
        execute_run(fast_spec, broken)
