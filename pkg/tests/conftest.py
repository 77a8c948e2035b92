import math

import pytest
from hypothesis import settings

from joyce.lattice import Lattice
from joyce.torus import ConeTruncation

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def std_lattice():
    return Lattice([[0, 1], [-1, 0]])


@pytest.fixture
def cone6(std_lattice):
    return ConeTruncation(std_lattice, [(1, 0), (0, 1)], 6)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
