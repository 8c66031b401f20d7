import os
import sys
from importlib import resources

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fsidwr.driver import RunConfig  # noqa: E402
from fsidwr.mesh import read_ucd  # noqa: E402
from fsidwr.meshgen import cylinder_manifolds  # noqa: E402


def shipped_text(name):
    return (resources.files("fsidwr") / "data" / name).read_text()


def shipped_mesh(name):
    return read_ucd(shipped_text(name), cylinder_manifolds())


@pytest.fixture(scope="session")
def fsi1_cfg():
    return RunConfig.from_file("fsi1")


@pytest.fixture(scope="session")
def flow_cfg():
    return RunConfig.from_file("flow2d1")


@pytest.fixture(scope="session")
def fsi1_coarse():
    return shipped_mesh("fsi1.inp")


@pytest.fixture(scope="session")
def flow_coarse():
    return shipped_mesh("flow2d1.inp")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import checks

    if checks.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(checks.ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
