"""Dual reweighted least-squares solvers for graph p-Laplacians and lp regression."""

from .nfunction import PowerNFunction, RegularizedNFunction, RelaxationInterval
from .sparse import CgConfig, SparseMatrix, solve_weighted_normal
from .problem import DualVector, ProblemSpec, reg_gap_bound
from .dirls import ConvergenceRecord, DirlsConfig, IterateState, dirls_step, ls_weights, solve
from .newton import NewtonConfig, newton_solve
from .graphs import (
    Hypergraph,
    SslTask,
    WeightedGraph,
    build_ssl_problem,
    clique_expansion,
    incidence_operator,
    knn_graph,
    one_vs_rest_classify,
)
from .regression import RegressionInstance, build_lifted, lp_residual, random_instance

__version__ = "0.1.0"

__all__ = [
    "PowerNFunction",
    "RegularizedNFunction",
    "RelaxationInterval",
    "SparseMatrix",
    "CgConfig",
    "solve_weighted_normal",
    "ProblemSpec",
    "DualVector",
    "reg_gap_bound",
    "DirlsConfig",
    "IterateState",
    "ConvergenceRecord",
    "ls_weights",
    "dirls_step",
    "solve",
    "NewtonConfig",
    "newton_solve",
    "WeightedGraph",
    "SslTask",
    "Hypergraph",
    "knn_graph",
    "incidence_operator",
    "clique_expansion",
    "build_ssl_problem",
    "one_vs_rest_classify",
    "RegressionInstance",
    "random_instance",
    "build_lifted",
    "lp_residual",
]
