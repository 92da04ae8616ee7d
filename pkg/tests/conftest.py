from __future__ import annotations

import pytest

from tripledetect import scenario as sc
from tripledetect import solver


@pytest.fixture(scope="session")
def psi():
    return sc.build_Psi_literal()


@pytest.fixture(scope="session")
def literal():
    return sc.literal_scenario()


@pytest.fixture(scope="session")
def repaired(literal):
    return solver.repair_scenario(literal)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for text in mod.summary_lines():
        terminalreporter.write_line(text)
