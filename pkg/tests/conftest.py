import pytest

from sbmlab.exponents import LaplaceExponentSpec


@pytest.fixture(scope="session")
def stable1():
    return LaplaceExponentSpec("stable", alpha=1.0)


@pytest.fixture(scope="session")
def cgeo1():
    return LaplaceExponentSpec("conjugate_geometric", beta=1.0)


@pytest.fixture(scope="session")
def cgamma():
    return LaplaceExponentSpec("conjugate_gamma")


@pytest.fixture(scope="session")
def geo1():
    return LaplaceExponentSpec("geometric_stable", beta=1.0)


@pytest.fixture(scope="session")
def drift1():
    return LaplaceExponentSpec("pure_drift", drift_b=1.0)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
