import mpmath
import pytest

mpmath.mp.dps = 30


@pytest.fixture
def mp_ei():
    """High-precision exponential integral used as an independent oracle."""
    return lambda x: float(mpmath.ei(x))


ACCEPTANCE_RESULTS = {}


def record_acceptance(number, title, passed, detail):
    """Store one criterion's outcome for the end-of-run report."""
    ACCEPTANCE_RESULTS[number] = (title, passed, detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}: {detail}")
