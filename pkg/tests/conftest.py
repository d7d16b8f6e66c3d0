import numpy as np
import pytest

from graphpencil.experiment import random_degree_separated_sbm
from graphpencil.graph import SbmParams, UndirectedGraph


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_graph(rng, n, p=None):
    p = rng.uniform(0.2, 0.8) if p is None else p
    upper = np.triu(rng.random((n, n)) < p, 1)
    return UndirectedGraph(upper | upper.T)


def random_sbm(rng, k, gap=0.05):
    return random_degree_separated_sbm(rng, k, gap=gap)


def random_any_sbm(rng, k):
    """Random SBM without the degree-separation requirement."""
    pi = rng.dirichlet(np.ones(k))
    u = rng.random((k, k))
    return SbmParams(pi / pi.sum(), np.triu(u) + np.triu(u, 1).T)


TRIANGLE = UndirectedGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
PATH3 = UndirectedGraph.from_edges(3, [(0, 1), (1, 2)])
K4 = UndirectedGraph(np.ones((4, 4), dtype=bool) & ~np.eye(4, dtype=bool))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
