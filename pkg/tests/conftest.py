import numpy as np
import pytest

from barron_risk.numerics import RngStream


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def stream():
    return RngStream(2024, 7)


_VERDICTS: dict = {}


@pytest.fixture
def verdict():
    """Record a PASS/FAIL/SKIP line for an acceptance criterion, then assert it."""

    def record(number: int, ok, detail: str):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        _VERDICTS[number] = f"criterion {number:>2}: {status}  {detail}"
        if ok is None:
            pytest.skip(detail)
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])
