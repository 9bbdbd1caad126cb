import json
from pathlib import Path

import pytest

from slenderdamage import ConstitutiveLaw, MaterialParams

FIXTURES = Path(__file__).parent / "fixtures"

# acceptance lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def derived():
    return json.loads((FIXTURES / "derived.json").read_text())


@pytest.fixture
def params():
    return MaterialParams(lam=1.0, mu=1.0, eta=0.1, w1=1.0, ell=0.2, eps_z=0.3)


@pytest.fixture
def law(params):
    return ConstitutiveLaw.from_params(params)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
