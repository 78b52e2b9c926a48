"""Graph construction, hypergraph expansion, and SSL assembly."""

import numpy as np
import pytest

from conftest import make_nfun

from plap.dirls import DirlsConfig, solve
from plap.errors import DataError
from plap.graphs import (
    Hypergraph,
    pca_features,
    SslTask,
    WeightedGraph,
    build_ssl_problem,
    clique_expansion,
    incidence_operator,
    knn_graph,
    one_vs_rest_classify,
)


class TestWeightedGraph:
    def test_validation(self):
        with pytest.raises(ValueError):
            WeightedGraph(3, [[1, 1]], [1.0])  # self loop
        with pytest.raises(ValueError):
            WeightedGraph(3, [[2, 1]], [1.0])  # wrong orientation
        with pytest.raises(ValueError):
            WeightedGraph(3, [[0, 1], [0, 1]], [1.0, 1.0])  # duplicate
        with pytest.raises(ValueError):
            WeightedGraph(3, [[0, 1]], [0.0])  # nonpositive weight

    def test_edge_list_export(self, tmp_path):
        g = WeightedGraph(3, [[0, 1], [1, 2]], [1.5, 2.5])
        path = tmp_path / "edges.txt"
        g.write_edge_list(path)
        rows = [line.split() for line in path.read_text().splitlines()]
        assert [r[:2] for r in rows] == [["0", "1"], ["1", "2"]]


class TestKnnGraph:
    def test_three_collinear_points(self):
        """Hand-built oracle: nearest neighbors at distance 1, bandwidth 1/2."""
        g = knn_graph(np.array([[0.0], [1.0], [2.0]]), 1)
        assert g.edges.tolist() == [[0, 1], [1, 2]]
        np.testing.assert_allclose(g.weights, np.exp(-4.0))

    def test_identical_points_weight_one(self):
        g = knn_graph(np.array([[1.0, 2.0], [1.0, 2.0]]), 1)
        assert g.edges.tolist() == [[0, 1]]
        np.testing.assert_array_equal(g.weights, [1.0])

    def test_saturation_gives_complete_graph(self, rng):
        pts = rng.standard_normal((7, 3))
        g = knn_graph(pts, 6)
        assert g.n_edges == 21

    def test_rejects_bad_k(self, rng):
        pts = rng.standard_normal((5, 2))
        with pytest.raises(ValueError):
            knn_graph(pts, 0)
        with pytest.raises(ValueError):
            knn_graph(pts, 5)

    def test_permutation_invariance(self, rng):
        """The edge set (as a set of point pairs) ignores input order."""
        pts = rng.standard_normal((20, 2))
        perm = rng.permutation(20)
        g1 = knn_graph(pts, 3)
        g2 = knn_graph(pts[perm], 3)
        inv = np.argsort(perm)

        def canon(graph, relabel):
            out = set()
            for (i, j), w in zip(graph.edges, graph.weights):
                a, b = relabel[i], relabel[j]
                out.add((min(a, b), max(a, b), round(w, 12)))
            return out

        assert canon(g1, np.arange(20)) == canon(g2, perm)

    def test_mutual_is_subset_of_union(self, rng):
        pts = rng.standard_normal((15, 2))
        union = knn_graph(pts, 3, symmetrize="union")
        mutual = knn_graph(pts, 3, symmetrize="mutual")
        u = {tuple(e) for e in union.edges.tolist()}
        m = {tuple(e) for e in mutual.edges.tolist()}
        assert m <= u


class TestIncidence:
    def test_single_edge(self):
        g = WeightedGraph(2, [[0, 1]], [1.0])
        B = incidence_operator(g)
        np.testing.assert_array_equal(B.matvec(np.array([3.0, 1.0])), [2.0])

    def test_constants_in_kernel(self, rng):
        pts = rng.standard_normal((10, 2))
        g = knn_graph(pts, 3)
        B = incidence_operator(g)
        np.testing.assert_array_equal(B.matvec(np.ones(10)), np.zeros(g.n_edges))
        v = rng.standard_normal(10)
        assert np.linalg.norm(B.matvec(v)) > 0

    def test_triangle_orientation(self):
        g = WeightedGraph(3, [[0, 1], [0, 2], [1, 2]], [1.0, 1.0, 1.0])
        B = incidence_operator(g)
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(B.matvec(v), [-1.0, -2.0, -1.0])


class TestCliqueExpansion:
    def test_single_hyperedge(self):
        h = Hypergraph(3, [(0, 1, 2)], [5.0])
        g = clique_expansion(h)
        assert g.edges.tolist() == [[0, 1], [0, 2], [1, 2]]
        np.testing.assert_array_equal(g.weights, [5.0, 5.0, 5.0])

    def test_mean_of_incident_weights(self):
        h = Hypergraph(2, [(0, 1), (0, 1)], [2.0, 4.0])
        g = clique_expansion(h)
        np.testing.assert_array_equal(g.weights, [3.0])

    def test_matches_grid_search(self, rng):
        """1-D least-squares weight against a refined grid oracle."""
        hedges = []
        for _ in range(12):
            size = int(rng.integers(2, 5))
            hedges.append(tuple(rng.choice(10, size=size, replace=False)))
        weights = rng.uniform(0.5, 4.0, 12)
        h = Hypergraph(10, hedges, weights)
        g = clique_expansion(h)
        for (i, j), w in zip(g.edges, g.weights):
            incident = [
                wh for members, wh in zip(h.hyperedges, h.weights)
                if i in members and j in members
            ]
            grid = np.linspace(min(incident), max(incident), 2_000_001)
            cost = np.sum((grid[None, :] - np.array(incident)[:, None]) ** 2, axis=0)
            best = grid[np.argmin(cost)]
            assert abs(w - best) <= 1e-6

    def test_hypergraph_validation(self):
        with pytest.raises(ValueError):
            Hypergraph(3, [(1,)], [1.0])
        with pytest.raises(ValueError):
            Hypergraph(3, [(0, 1)], [-1.0])


class TestBuildSsl:
    def test_path_harmonic_interpolation(self):
        """p=2 on a path with endpoint labels gives the linear interpolant."""
        g = WeightedGraph(3, [[0, 1], [1, 2]], [1.0, 1.0])
        task = SslTask(np.zeros((3, 1)), {0: 0, 2: 1}, 2)
        spec = build_ssl_problem(g, task, 0, make_nfun(2.0))
        u_g, _, rec = solve(spec)
        np.testing.assert_allclose(u_g, [1.0, 0.0, -1.0], atol=1e-10)

    def test_all_vertices_labeled(self):
        g = WeightedGraph(2, [[0, 1]], [1.0])
        task = SslTask(np.zeros((2, 1)), {0: 0, 1: 1}, 2)
        spec = build_ssl_problem(g, task, 1, make_nfun(2.0))
        u_g, _, rec = solve(spec)
        np.testing.assert_array_equal(u_g, [-1.0, 1.0])

    def test_symmetric_instance_odd_symmetry(self):
        g = WeightedGraph(3, [[0, 1], [1, 2]], [1.0, 1.0])
        task = SslTask(np.zeros((3, 1)), {0: 0, 2: 1}, 2)
        spec = build_ssl_problem(g, task, 0, make_nfun(10.0, (1e-3, 1e3)))
        u_g, _, _ = solve(spec, DirlsConfig(max_outer=60))
        assert abs(u_g[1]) <= 1e-8

    def test_unlabeled_component_rejected(self):
        g = WeightedGraph(4, [[0, 1], [2, 3]], [1.0, 1.0])
        task = SslTask(np.zeros((4, 1)), {0: 0, 1: 1}, 2)
        with pytest.raises(DataError, match="component"):
            build_ssl_problem(g, task, 0, make_nfun(2.0))

    def test_edge_weights_doubled(self):
        g = WeightedGraph(2, [[0, 1]], [3.0])
        task = SslTask(np.zeros((2, 1)), {0: 0, 1: 1}, 2)
        spec = build_ssl_problem(g, task, 0, make_nfun(2.0))
        np.testing.assert_array_equal(spec.w, [6.0])

    def test_energy_identity_against_double_loop(self, rng):
        """Vertex-pair double loop (1/p) sum w_ij |v_i - v_j|^p equals the
        assembled energy with doubled edge weights."""
        pts = rng.standard_normal((12, 2))
        g = knn_graph(pts, 3)
        task = SslTask(pts, {0: 0, 11: 1}, 2)
        for p in (2.0, 4.0):
            spec = build_ssl_problem(g, task, 0, make_nfun(p))
            v = rng.standard_normal(12)
            W = np.zeros((12, 12))
            for (i, j), w in zip(g.edges, g.weights):
                W[i, j] = W[j, i] = w
            direct = np.sum(W * np.abs(v[:, None] - v[None, :]) ** p) / p
            np.testing.assert_allclose(spec.primal_energy(v), direct, rtol=1e-12)


class TestOneVsRest:
    def test_single_class(self, rng):
        pts = rng.standard_normal((8, 2))
        g = knn_graph(pts, 3)
        task = SslTask(pts, {0: 0}, 1)
        pred, per = one_vs_rest_classify(g, task, make_nfun(2.0))
        np.testing.assert_array_equal(pred, np.zeros(8, dtype=int))

    def test_labeled_vertices_keep_their_class(self, rng):
        half = 15
        pts = np.concatenate(
            [rng.normal(0, 0.3, (half, 2)), rng.normal([4, 4], 0.3, (half, 2))]
        )
        g = knn_graph(pts, 4)
        task = SslTask(pts, {0: 0, half: 1}, 2)
        nfun = make_nfun(10.0, (1e-3, 1e3))
        pred, per = one_vs_rest_classify(g, task, nfun, DirlsConfig(max_outer=40))
        assert pred[0] == 0 and pred[half] == 1

    def test_argmax_scale_invariance(self, rng):
        """Scaling every class score by the same positive factor cannot
        change the argmax decisions."""
        pts = rng.standard_normal((10, 2))
        g = knn_graph(pts, 3)
        task = SslTask(pts, {0: 0, 9: 1}, 2)
        pred, per = one_vs_rest_classify(g, task, make_nfun(2.0))
        scores = np.stack([per[c].u_g for c in range(2)], axis=1)
        for factor in (0.5, 3.0, 100.0):
            np.testing.assert_array_equal(
                np.argmax(scores * factor, axis=1), pred
            )

    def test_threaded_matches_serial(self, rng):
        pts = np.concatenate(
            [rng.normal(0, 0.4, (10, 2)), rng.normal([3, 3], 0.4, (10, 2))]
        )
        g = knn_graph(pts, 3)
        task = SslTask(pts, {0: 0, 10: 1}, 2)
        nfun = make_nfun(4.0, (1e-3, 1e3))
        p1, _ = one_vs_rest_classify(g, task, nfun, DirlsConfig(max_outer=30))
        p2, _ = one_vs_rest_classify(
            g, task, nfun, DirlsConfig(max_outer=30), threads=2
        )
        np.testing.assert_array_equal(p1, p2)

    def test_tie_breaks_to_lowest_class(self):
        g = WeightedGraph(2, [[0, 1]], [1.0])
        task = SslTask(np.zeros((2, 1)), {0: 0, 1: 1}, 2)
        pred, _ = one_vs_rest_classify(g, task, make_nfun(2.0))
        # both labeled: scores are (+1,-1) and (-1,+1); middle vertices absent
        assert pred.tolist() == [0, 1]


class TestPcaFeatures:
    def test_matches_eigendecomposition(self, rng):
        x = rng.standard_normal((40, 6)) @ np.diag([5.0, 3.0, 1.0, 0.3, 0.1, 0.05])
        proj = pca_features(x, 2, seed=3)
        centered = x - x.mean(axis=0)
        cov = centered.T @ centered
        vals, vecs = np.linalg.eigh(cov)
        top = vecs[:, ::-1][:, :2]
        oracle = centered @ top
        # spans agree: project one onto the other and compare norms
        q, _ = np.linalg.qr(oracle)
        back = q @ (q.T @ proj)
        np.testing.assert_allclose(back, proj, atol=1e-8 * np.abs(proj).max())

    def test_deterministic(self, rng):
        x = rng.standard_normal((20, 5))
        np.testing.assert_array_equal(
            pca_features(x, 3, seed=1), pca_features(x, 3, seed=1)
        )

    def test_dims_validation(self, rng):
        with pytest.raises(ValueError):
            pca_features(rng.standard_normal((5, 3)), 4)
