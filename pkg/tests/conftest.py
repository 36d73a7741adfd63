import re

import pytest

_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Register an acceptance verdict; the summary prints one line per id."""

    def _record(cid: str, ok: bool, detail: str) -> bool:
        _CRITERIA[cid] = (bool(ok), detail)
        return bool(ok)

    return _record


def _natural(cid: str):
    return [int(t) if t.isdigit() else t for t in re.findall(r"\d+|\D+", cid)]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=_natural):
        ok, detail = _CRITERIA[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {cid:<4} {detail}")
