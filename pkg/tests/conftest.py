import pytest

from ksverify.config import build_configuration, build_peres_configuration
from ksverify.exact import canonicalize, vec
from ksverify.solver import build_constraints


@pytest.fixture(scope="session")
def peres():
    return build_peres_configuration()


@pytest.fixture(scope="session")
def peres_constraints(peres):
    return build_constraints(peres)


@pytest.fixture(scope="session")
def toy():
    """The coordinate triple on its own."""
    return build_configuration([canonicalize(vec(1, 0, 0)), canonicalize(vec(0, 1, 0)), canonicalize(vec(0, 0, 1))])


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
