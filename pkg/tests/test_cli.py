import json

import pytest

from conftest import fast_spec_raw
from tradeoff_forge.cli import main
from tradeoff_forge.core import resource_path

CASE = str(resource_path("case_study.json"))
POLICY = str(resource_path("policy_fixture.json"))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, case_raw):
    d = tmp_path_factory.mktemp("cli")
    spec = d / "spec.json"
    spec.write_text(json.dumps(fast_spec_raw(case_raw)), encoding="utf-8")
    assert main(["gen-data", "--rows", "1500", "--seed", "3", "--out", str(d / "data.csv")]) == 0
    return d, spec


def test_gen_data_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["gen-data", "--rows", "300", "--seed", "9", "--out", str(a)]) == 0
    assert main(["gen-data", "--rows", "300", "--seed", "9", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_bytes().splitlines()) == 301
    assert (tmp_path / "a.csv.provenance.json").is_file()


def test_gen_data_errors(tmp_path):
    assert main(["gen-data", "--rows", "10", "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["gen-data", "--out", str(tmp_path / "missing" / "x.csv"), "--rows", "200"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["gen-data", "--rows", "ten", "--out", "x.csv"])
    assert exc.value.code == 2


def test_seed_env_override(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("TRADEOFF_FORGE_SEED", "5")
    main(["gen-data", "--rows", "200", "--seed", "1", "--out", str(a)])
    monkeypatch.delenv("TRADEOFF_FORGE_SEED")
    main(["gen-data", "--rows", "200", "--seed", "5", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_plan(capsys, tmp_path):
    assert main(["plan", "--spec", CASE]) == 0
    assert "Set 8 |" in capsys.readouterr().out
    assert main(["plan", "--spec", CASE, "--format", "json", "--no-rules"]) == 0
    assert len(json.loads(capsys.readouterr().out)["sets"]) == 16
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"requirements": []}), encoding="utf-8")
    assert main(["plan", "--spec", str(bad)]) == 2
    assert "requirements" in capsys.readouterr().err


def test_run_select_report(workspace, capsys):
    d, spec = workspace
    out = d / "runs"
    assert main(["run", "--spec", str(spec), "--data", str(d / "data.csv"), "--out", str(out),
                 "--format", "json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    run = out / summary["run_id"]
    assert summary["sets"] == 8
    assert len((run / "tradeoff.md").read_text().splitlines()) == 12

    assert main(["select", "--run", str(run), "--policy", POLICY, "--format", "json"]) == 0
    sel = json.loads(capsys.readouterr().out)
    report = (run / "report.md").read_text()
    if sel["chosen"] is None:
        assert "No model meets the selection thresholds." in report
    else:
        assert f"Chosen: **Set {sel['chosen']}**" in report
    before = (run / "report.md").read_bytes()
    assert main(["report", "--run", str(run)]) == 0
    assert (run / "report.md").read_bytes() == before

    bad_policy = d / "bad_policy.json"
    bad_policy.write_text(json.dumps({"thresholds": [{"dimension": "speed", "op": ">=", "value": 1}]}))
    assert main(["select", "--run", str(run), "--policy", str(bad_policy)]) == 2


def test_infeasible_select_exit_zero(workspace, capsys):
    d, spec = workspace
    out = d / "runs"
    main(["run", "--spec", str(spec), "--data", str(d / "data.csv"), "--out", str(out),
          "--format", "json"])
    run = out / json.loads(capsys.readouterr().out)["run_id"]
    policy = d / "impossible.json"
    policy.write_text(json.dumps({"thresholds": [{"dimension": "recall", "op": ">=", "value": 1.01}]}))
    assert main(["select", "--run", str(run), "--policy", str(policy)]) == 0
    assert "no set meets the thresholds" in capsys.readouterr().out
    assert "No model meets the selection thresholds." in (run / "report.md").read_text()


def test_run_missing_data(workspace):
    _, spec = workspace
    assert main(["run", "--spec", str(spec), "--data", "/nonexistent.csv"]) == 1
