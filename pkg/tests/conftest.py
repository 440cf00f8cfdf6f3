import json
from pathlib import Path

import pytest

from tradeoff_forge.core import case_study_spec, resource_path, validate_spec
from tradeoff_forge.synthgen import GenConfig, generate, split
from tradeoff_forge.trademap import TradeoffRecord

FIXTURES = Path(__file__).parent / "fixtures"

# Lines appended by the acceptance module, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def case_spec():
    return case_study_spec()


@pytest.fixture(scope="session")
def case_raw():
    return json.loads(resource_path("case_study.json").read_text(encoding="utf-8"))


def fast_spec_raw(raw):
    """Case-study spec with light models for quick pipeline tests."""
    raw = json.loads(json.dumps(raw))
    raw["hyper"] = {"logreg": {"epochs": 300}, "forest": {"n_trees": 10, "max_depth": 5}}
    raw["minimization_proto"] = {"logreg": {"epochs": 100}, "forest": {"n_trees": 5}}
    for op in raw["operationalizations"]:
        if op["kind"] == "data-minimization":
            op["params"]["batch_size"] = 300
    return raw


@pytest.fixture(scope="session")
def fast_spec(case_raw):
    return validate_spec(fast_spec_raw(case_raw))


@pytest.fixture(scope="session")
def small_dataset():
    return generate(GenConfig(n_rows=2000, seed=7))


@pytest.fixture(scope="session")
def small_splits(small_dataset):
    return split(small_dataset, (0.6, 0.2, 0.2), 7)


@pytest.fixture
def reference_records():
    rows = json.loads((FIXTURES / "reference_rows.json").read_text(encoding="utf-8"))
    return [TradeoffRecord(**r) for r in rows]
