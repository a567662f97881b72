import json
from pathlib import Path

import pytest

GOLDEN = Path(__file__).parent / "golden"

_acceptance_lines: list[str] = []


@pytest.fixture
def golden():
    def load(name: str):
        return json.loads((GOLDEN / name).read_text(encoding="utf-8"))
    return load


@pytest.fixture
def accept():
    """record(criterion, ok, detail): log one acceptance line, then assert it."""
    def record(criterion: int, ok: bool, detail: str):
        line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _acceptance_lines.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
