"""Collects one summary line per acceptance criterion and prints them at the end of the run."""

from __future__ import annotations

ACCEPTANCE_LINES: dict[str, list[tuple[bool, str]]] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    """Register the outcome of one sub-check of an acceptance criterion."""
    ACCEPTANCE_LINES.setdefault(criterion, []).append((bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE_LINES):
        parts = ACCEPTANCE_LINES[criterion]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        details = "; ".join(f"{d} [{'ok' if ok else 'miss'}]" for ok, d in parts)
        terminalreporter.write_line(f"{status} criterion {criterion}: {details}")
