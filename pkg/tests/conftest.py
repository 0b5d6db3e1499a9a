import functools

import pytest

from bassserre.jsj_engine import Catalog
from bassserre.project import bundled, load

PROJECTS = ("torus", "guirardel", "rem32", "klein", "dinf")


@functools.lru_cache(maxsize=None)
def project(name):
    return load(bundled(name))


@functools.lru_cache(maxsize=None)
def catalog(name):
    R = project(name)
    return Catalog(R.ambient, list(R.splittings))


@pytest.fixture(scope="session")
def torus():
    return project("torus")


@pytest.fixture(scope="session")
def guirardel():
    return project("guirardel")


@pytest.fixture(scope="session")
def rem32():
    return project("rem32")


@pytest.fixture(scope="session")
def klein():
    return project("klein")


@pytest.fixture(scope="session")
def dinf():
    return project("dinf")


# one line per acceptance criterion, filled in by test_acceptance
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
