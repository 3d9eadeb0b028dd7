import pytest

from dirichlet_walk.dirichlet import genus2_context, torus_context

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def g2():
    return genus2_context()


@pytest.fixture(scope="session")
def z2():
    return torus_context("lattice:2")


@pytest.fixture(scope="session")
def z3():
    return torus_context("lattice:3")


@pytest.fixture(scope="session")
def z1():
    return torus_context("lattice:1")


@pytest.fixture
def report(capsys):
    """Record one pass/fail line for an acceptance criterion and echo it live."""

    def _report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
