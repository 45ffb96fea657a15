import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """``criterion(number, passed, detail)`` records a one-line acceptance verdict."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(_LINES):
            terminalreporter.write_line(_LINES[number])
