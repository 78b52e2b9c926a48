"""Weighted graphs, k-NN construction, hypergraph expansion and SSL assembly.

Graphs are undirected with a canonical edge orientation ``[i, j]``, ``i < j``;
the discrete gradient maps vertex values to oriented differences
``(Bv)_e = v_i - v_j``.  Semi-supervised problems fix the labeled vertices to
plus/minus one (one-vs-rest) and smooth the free vertices by minimizing the
p-Dirichlet energy.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from .dirls import DirlsConfig, solve
from .errors import DataError
from .problem import ProblemSpec
from .sparse import SparseMatrix

__all__ = [
    "WeightedGraph",
    "pca_features",
    "SslTask",
    "Hypergraph",
    "knn_graph",
    "incidence_operator",
    "clique_expansion",
    "build_ssl_problem",
    "one_vs_rest_classify",
]


@dataclass
class WeightedGraph:
    """Undirected graph with canonical oriented edges [i, j], i < j."""

    n_vertices: int
    edges: np.ndarray  # (M, 2) int
    weights: np.ndarray  # (M,) positive

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.edges) != len(self.weights):
            raise ValueError("edge and weight counts differ")
        if len(self.edges):
            if self.edges.min() < 0 or self.edges.max() >= self.n_vertices:
                raise ValueError("vertex index out of range")
            if np.any(self.edges[:, 0] >= self.edges[:, 1]):
                raise ValueError("edges must be oriented with i < j and no self-loops")
            keys = self.edges[:, 0] * self.n_vertices + self.edges[:, 1]
            if len(np.unique(keys)) != len(keys):
                raise ValueError("duplicate edges")
        if np.any(self.weights <= 0.0):
            raise ValueError("edge weights must be positive")

    @property
    def n_edges(self):
        return len(self.edges)

    def adjacency(self):
        i, j = self.edges[:, 0], self.edges[:, 1]
        ones = np.ones(len(i))
        return scipy.sparse.coo_matrix(
            (np.concatenate([ones, ones]), (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(self.n_vertices, self.n_vertices),
        ).tocsr()

    def write_edge_list(self, path):
        with open(path, "w") as fh:
            for (i, j), w in zip(self.edges, self.weights):
                fh.write(f"{i} {j} {w!r}\n")


@dataclass
class SslTask:
    """Features plus a small labeled subset for multi-class prediction."""

    features: np.ndarray
    labels: dict  # vertex index -> class id
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if not self.labels:
            raise ValueError("at least one labeled vertex is required")
        present = set(self.labels.values())
        missing = [c for c in range(self.n_classes) if c not in present]
        if missing:
            raise ValueError(f"no labeled vertex for classes {missing}")


@dataclass
class Hypergraph:
    n_vertices: int
    hyperedges: list  # of vertex collections, each with >= 2 distinct members
    weights: np.ndarray

    def __post_init__(self):
        self.hyperedges = [tuple(sorted(set(map(int, h)))) for h in self.hyperedges]
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.hyperedges) != len(self.weights):
            raise ValueError("hyperedge and weight counts differ")
        for h in self.hyperedges:
            if len(h) < 2:
                raise ValueError("hyperedges need at least 2 distinct vertices")
            if h[0] < 0 or h[-1] >= self.n_vertices:
                raise ValueError("vertex index out of range")
        if np.any(self.weights <= 0.0):
            raise ValueError("hyperedge weights must be positive")


def pca_features(features, dims, iters=60, seed=0):
    """Project features onto their top principal directions.

    Subspace power iteration on the centered covariance; deterministic for a
    fixed seed.  Meant as a lightweight preprocessing step before the k-NN
    construction, not a general factorization routine.
    """
    x = np.asarray(features, dtype=float)
    n, d = x.shape
    if not 1 <= dims <= d:
        raise ValueError(f"need 1 <= dims <= {d}, got {dims}")
    centered = x - x.mean(axis=0)
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, dims)))
    for _ in range(iters):
        q, _ = np.linalg.qr(centered.T @ (centered @ q))
    return centered @ q


def knn_graph(features, k, symmetrize="union"):
    """Symmetrized k-nearest-neighbor graph with Gaussian similarity weights.

    Edge lengths are Euclidean feature distances; the bandwidth is half the
    longest edge of the constructed set and the weights are
    ``exp(-(d / bandwidth)^2)``.  Coincident points get weight 1.  With
    ``symmetrize='union'`` an edge appears if either endpoint selects the
    other, with 'mutual' both must.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    if k < 1 or k >= n:
        raise ValueError(f"need 1 <= k < n_vertices, got k={k}, n={n}")
    if symmetrize not in ("union", "mutual"):
        raise ValueError(f"unknown symmetrize mode {symmetrize!r}")

    sq = np.sum(np.square(x), axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)

    # k smallest per row, ties broken towards lower index (stable sort)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = order.ravel()
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    keys = lo * n + hi
    if symmetrize == "union":
        uniq = np.unique(keys)
    else:
        uniq, counts = np.unique(keys, return_counts=True)
        uniq = uniq[counts == 2]
    if len(uniq) == 0:
        raise ValueError("mutual symmetrization produced an empty edge set")
    i = uniq // n
    j = uniq % n
    edges = np.stack([i, j], axis=1)
    lengths = np.sqrt(d2[i, j])
    bandwidth = 0.5 * float(lengths.max())
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.exp(-np.square(lengths / bandwidth))
    weights = np.where(lengths == 0.0, 1.0, weights)
    keep = weights > 0.0
    return WeightedGraph(n, edges[keep], weights[keep])


def incidence_operator(graph):
    """Oriented incidence matrix: +1 at (e, i), -1 at (e, j) for e = [i, j]."""
    m = graph.n_edges
    row_offsets = np.arange(0, 2 * m + 1, 2)
    col_indices = graph.edges.reshape(-1)
    values = np.tile([1.0, -1.0], m)
    return SparseMatrix(m, graph.n_vertices, row_offsets, col_indices, values)


def clique_expansion(h):
    """Replace hyperedges by cliques; each pair weight is the mean over the
    hyperedges containing both endpoints (the least-squares fit of a single
    weight to all of them)."""
    sums = {}
    counts = {}
    for members, w in zip(h.hyperedges, h.weights):
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                key = (members[a], members[b])
                sums[key] = sums.get(key, 0.0) + float(w)
                counts[key] = counts.get(key, 0) + 1
    if not sums:
        raise ValueError("hypergraph produced no pairs")
    pairs = sorted(sums)
    edges = np.array(pairs, dtype=np.int64)
    weights = np.array([sums[p] / counts[p] for p in pairs])
    return WeightedGraph(h.n_vertices, edges, weights)


def build_ssl_problem(graph, task, class_id, nfun):
    """One-vs-rest p-Dirichlet problem: labeled vertices fixed to +1 for the
    target class and -1 otherwise, free vertices smoothed.

    Every connected component must contain a labeled vertex, otherwise the
    energy cannot see the component and the problem is rejected.  Edge
    weights enter doubled (each undirected pair is counted once per
    orientation in the vertex-pair form of the energy).
    """
    n = graph.n_vertices
    labeled = sorted(task.labels)
    if not labeled:
        raise DataError("no labeled vertices")

    n_comp, comp = scipy.sparse.csgraph.connected_components(
        graph.adjacency(), directed=False
    )
    has_label = np.zeros(n_comp, dtype=bool)
    for v in labeled:
        has_label[comp[v]] = True
    if not np.all(has_label):
        bad = int(np.flatnonzero(~has_label)[0])
        members = np.flatnonzero(comp == bad)[:8].tolist()
        raise DataError(
            f"connected component {bad} (vertices {members}...) contains no "
            "labeled vertex; its values are unconstrained"
        )

    fixed = np.zeros(n, dtype=bool)
    g = np.zeros(n)
    for v, cls in task.labels.items():
        fixed[v] = True
        g[v] = 1.0 if cls == class_id else -1.0
    return ProblemSpec(
        incidence_operator(graph),
         2.0 * graph.weights,
        np.zeros(n),
        g,
        fixed,
        nfun,
        validate="skip",
    )


def one_vs_rest_classify(graph, task, nfun, cfg=None, threads=1, callback=None):
    """Solve one binary problem per class and predict by highest score.

    Returns ``(predictions, per_class)`` where ``per_class`` maps class ids to
    their solve results (or to the exception if that class failed; remaining
    classes are still solved and failed classes never win the argmax).
    ``callback(class_id, state)`` observes every outer iteration.
    """
    cfg = cfg or DirlsConfig()
    n = graph.n_vertices
    scores = np.full((n, task.n_classes), -np.inf)
    per_class = {}

    def run(cls):
        spec = build_ssl_problem(graph, task, cls, nfun)
        cb = None if callback is None else (lambda state: callback(cls, state))
        return solve(spec, cfg, callback=cb)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {cls: pool.submit(run, cls) for cls in range(task.n_classes)}
            outcomes = {cls: _capture(fut) for cls, fut in futures.items()}
    else:
        outcomes = {}
        for cls in range(task.n_classes):
            try:
                outcomes[cls] = run(cls)
            except Exception as exc:
                outcomes[cls] = exc

    for cls, outcome in outcomes.items():
        per_class[cls] = outcome
        if not isinstance(outcome, Exception):
            scores[:, cls] = outcome.u_g

    if np.all(np.isneginf(scores)):
        raise DataError("every class solve failed")
    predictions = np.argmax(scores, axis=1)  # ties break to the lowest class id
    return predictions, per_class


def _capture(future):
    try:
        return future.result()
    except Exception as exc:
        return exc
