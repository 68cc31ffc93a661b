import json
from pathlib import Path

import pytest

from availbound import ModelParams

ORACLES = json.loads(Path(__file__).with_name("oracle_values.json").read_text())
_criteria: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def oracles():
    return ORACLES


@pytest.fixture(scope="session")
def canonical():
    return ModelParams.pareto()


@pytest.fixture
def criterion():
    """Record one acceptance line; use as ``criterion(name, ok, detail)``."""
    def record(name, ok, detail=""):
        _criteria.append((name, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _criteria:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
