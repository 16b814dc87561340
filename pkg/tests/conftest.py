import pytest

_LINES: list[str] = []


class _Recorder:
    def __call__(self, label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _LINES.append(line)
        print(line)
        return ok


@pytest.fixture(scope="session")
def criterion():
    """Record one pass/fail line per acceptance criterion."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
