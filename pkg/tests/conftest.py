import pytest

from hitchin_rmatrix.chart import search_chart
from hitchin_rmatrix.curve import build_curve
from hitchin_rmatrix.looplie import LieData

D1 = [-1, 0, 0, 0, 0, 1]
D2 = [1, 1, 0, 0, 0, 0, 1]


@pytest.fixture(scope="session")
def lie2():
    return LieData(2)


@pytest.fixture(scope="session")
def curve1():
    return build_curve(D1)


@pytest.fixture(scope="session")
def curve2():
    return build_curve(D2)


@pytest.fixture(scope="session")
def chart1(curve1, lie2):
    return search_chart(curve1, lie2, seed=0, attempts=50)


@pytest.fixture(scope="session")
def chart2(curve2, lie2):
    return search_chart(curve2, lie2, seed=0, attempts=50)


@pytest.fixture(scope="session")
def ks1(chart1):
    from hitchin_rmatrix.kernels import KernelSet
    return KernelSet(chart1, 3)


@pytest.fixture(scope="session")
def ks2(chart2):
    from hitchin_rmatrix.kernels import KernelSet
    return KernelSet(chart2, 3)


_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Records ``criterion -> (ok, detail)``; printed in the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
