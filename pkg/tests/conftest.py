import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from patchhopf.network import build_from_edges, paper_network_9

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=30
)
settings.load_profile("default")


@pytest.fixture
def paper9():
    return paper_network_9()


@pytest.fixture
def two_patch():
    """m = (1, -2) with unit coupling: lambda_* = 1/2, d_* = 2."""
    return build_from_edges(2, [(1, 2, 1.0)], [1.0, -2.0])


def homogeneous(n=2, c=3.0, weight=1.0):
    edges = [(j, j + 1, weight) for j in range(1, n)]
    return build_from_edges(n, edges, np.full(n, c))


@pytest.fixture
def homog2():
    return homogeneous(2, 3.0)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
