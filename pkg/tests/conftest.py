from contextlib import contextmanager

import pytest


class AcceptanceLog:
    """Collects per-criterion outcomes; a criterion passes only if all its checks do."""

    def __init__(self):
        self.results: dict[str, list[tuple[bool, str]]] = {}

    @contextmanager
    def check(self, criterion: str, label: str):
        note = {"detail": ""}
        try:
            yield note
        except BaseException:
            self.results.setdefault(criterion, []).append((False, f"{label} {note['detail']}".strip()))
            raise
        self.results.setdefault(criterion, []).append((True, f"{label} {note['detail']}".strip()))


_LOG = AcceptanceLog()


@pytest.fixture(scope="session")
def acceptance():
    return _LOG


def pytest_terminal_summary(terminalreporter):
    if not _LOG.results:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_LOG.results):
        checks = _LOG.results[crit]
        ok = all(passed for passed, _ in checks)
        shown = [d for passed, d in checks if not passed] if not ok else [d for _, d in checks]
        terminalreporter.write_line(f"{crit} {'PASS' if ok else 'FAIL'}: " + "; ".join(shown))
