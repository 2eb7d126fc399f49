"""Shared pytest plumbing: acceptance-criterion reporting."""

import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one ``PASS/FAIL criterion k: ...`` line and assert on it.

    The lines are echoed immediately and repeated in the terminal summary,
    so they are visible without ``-s``.
    """

    def _report(k: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        _LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
