import numpy as np
import pytest

_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    """Record a one-line verdict for an acceptance criterion.

    Call it with the criterion label and a detail string *before* asserting,
    then again with ``passed=True`` once the assertions have gone through.  A
    criterion whose last record is not a pass is reported as FAIL.
    """

    def record(label: str, detail: str, passed: bool = False):
        _CRITERIA[label] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: (len(s), s)):
        passed, detail = _CRITERIA[label]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
