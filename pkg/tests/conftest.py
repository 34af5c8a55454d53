import pytest

from freeloop.graphs import directed_double, dynkin_a, dynkin_a_infty, loop_bouquet
from freeloop.loops import GnsWorkspace


@pytest.fixture(scope="session")
def bouquet1():
    return loop_bouquet(1)


@pytest.fixture(scope="session")
def bouquet2():
    return loop_bouquet(2)


@pytest.fixture(scope="session")
def a3():
    return dynkin_a(3)


@pytest.fixture(scope="session")
def a_trunc6():
    return dynkin_a_infty(6)


@pytest.fixture(scope="session")
def ws_bouquet1(bouquet1):
    return GnsWorkspace(directed_double(bouquet1), 12)


@pytest.fixture(scope="session")
def ws_bouquet2(bouquet2):
    return GnsWorkspace(directed_double(bouquet2), 8)


@pytest.fixture(scope="session")
def ws_a3(a3):
    return GnsWorkspace(directed_double(a3), 10)
