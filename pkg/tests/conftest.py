"""Shared builders for small test problems."""

import numpy as np
import pytest

from plap.graphs import WeightedGraph, incidence_operator
from plap.nfunction import PowerNFunction, RegularizedNFunction, RelaxationInterval
from plap.problem import ProblemSpec
from plap.regression import build_lifted, random_instance


def make_nfun(p, delta=None):
    base = PowerNFunction(p)
    if delta is None:
        return base
    return RegularizedNFunction(base, RelaxationInterval(*delta))


def path_graph_spec(values, p=2.0, delta=None, f=None, weights=None):
    """Path 0-1-...-(n-1); ``values`` maps vertex -> prescribed value."""
    n = max(max(values) + 1, 3)
    edges = np.array([[i, i + 1] for i in range(n - 1)])
    w = np.ones(n - 1) if weights is None else np.asarray(weights, dtype=float)
    graph = WeightedGraph(n, edges, w)
    B = incidence_operator(graph)
    fixed = np.zeros(n, dtype=bool)
    g = np.zeros(n)
    for v, val in values.items():
        fixed[v] = True
        g[v] = val
    fvec = np.zeros(n) if f is None else np.asarray(f, dtype=float)
    return ProblemSpec(B, w, fvec, g, fixed, make_nfun(p, delta), validate="skip")


def small_regression_spec(m, n, seed, p, delta=(1e-9, 1e9)):
    inst = random_instance(m, n, seed, p=p)
    return inst, build_lifted(inst, make_nfun(p, delta), validate="skip")


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)
