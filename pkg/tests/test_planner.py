"""Tests for the graph planner: Dijkstra, graph building, and round trips."""

import math

import numpy as np
import pytest

from maniflow import planner


def brute_force_dist(graph, source):
    """Bellman-Ford style relaxation, used as an independent oracle."""
    n = graph.n_nodes
    dist = [math.inf] * n
    dist[source] = 0.0
    for _ in range(n):
        changed = False
        for u, v, w in graph.edges():
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            break
    return dist


def random_graph(rng, max_nodes=8):
    n = int(rng.integers(2, max_nodes + 1))
    g = planner.WeightedDigraph()
    for _ in range(n):
        g.add_node()
    n_edges = int(rng.integers(0, n * (n - 1) + 1))
    for _ in range(n_edges):
        u = int(rng.integers(0, n))
        v = int(rng.integers(0, n))
        if u == v:
            continue
        # occasional zero weights exercise tie-breaking
        w = 0.0 if rng.random() < 0.2 else float(rng.random() * 5.0)
        g.add_edge(u, v, w)
    return g


class TestDijkstra:
    def test_line_graph(self):
        g = planner.WeightedDigraph()
        for _ in range(4):
            g.add_node()
        g.add_edge(0, 1, 1.0)
        g.add_edge(1, 2, 2.0)
        g.add_edge(2, 3, 0.5)
        res = planner.dijkstra(g, 0)
        assert res.dist == [0.0, 1.0, 3.0, 3.5]
        assert res.pred == [None, 0, 1, 2]

    def test_unreachable_nodes(self):
        g = planner.WeightedDigraph()
        for _ in range(3):
            g.add_node()
        g.add_edge(0, 1, 1.0)
        res = planner.dijkstra(g, 0)
        assert math.isinf(res.dist[2])
        assert res.pred[2] is None
        assert planner.shortest_path(g, 0, 2) is None

    def test_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            g = random_graph(rng)
            src = int(rng.integers(0, g.n_nodes))
            res = planner.dijkstra(g, src)
            expected = brute_force_dist(g, src)
            np.testing.assert_allclose(res.dist, expected)

    def test_deterministic_tie_break(self):
        # two equal-cost routes to node 3: via 1 and via 2
        g = planner.WeightedDigraph()
        for _ in range(4):
            g.add_node()
        g.add_edge(0, 2, 1.0)
        g.add_edge(0, 1, 1.0)
        g.add_edge(2, 3, 1.0)
        g.add_edge(1, 3, 1.0)
        res = planner.dijkstra(g, 0)
        assert res.pred[3] == 1

    def test_repeat_runs_identical(self):
        rng = np.random.default_rng(7)
        g = random_graph(rng)
        first = planner.dijkstra(g, 0)
        for _ in range(5):
            again = planner.dijkstra(g, 0)
            assert again.dist == first.dist
            assert again.pred == first.pred

    def test_pred_tree_acyclic_with_zero_weights(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            g = random_graph(rng)
            res = planner.dijkstra(g, 0)
            for v in range(g.n_nodes):
                if math.isinf(res.dist[v]):
                    continue
                seen = set()
                node = v
                while node is not None:
                    assert node not in seen
                    seen.add(node)
                    node = res.pred[node]
                assert 0 in seen

    def test_negative_weight_rejected(self):
        g = planner.WeightedDigraph()
        g.add_node()
        g.add_node()
        with pytest.raises(ValueError, match="negative"):
            g.add_edge(0, 1, -0.5)

    def test_nonfinite_weight_rejected(self):
        g = planner.WeightedDigraph()
        g.add_node()
        g.add_node()
        with pytest.raises(ValueError, match="finite"):
            g.add_edge(0, 1, math.inf)

    def test_bad_source(self):
        g = planner.WeightedDigraph()
        g.add_node()
        with pytest.raises(ValueError):
            planner.dijkstra(g, 5)


class TestShortestPath:
    def test_path_and_cost(self):
        g = planner.WeightedDigraph()
        for _ in range(4):
            g.add_node()
        g.add_edge(0, 1, 1.0)
        g.add_edge(1, 3, 1.0)
        g.add_edge(0, 3, 5.0)
        path, cost = planner.shortest_path(g, 0, 3)
        assert path == [0, 1, 3]
        assert cost == 2.0

    def test_source_is_target(self):
        g = planner.WeightedDigraph()
        g.add_node()
        path, cost = planner.shortest_path(g, 0, 0)
        assert path == [0]
        assert cost == 0.0


class TestBuildNdmGraph:
    def test_knn_connectivity(self):
        samples = [np.array([float(i)]) for i in range(5)]
        g = planner.build_ndm_graph(samples, ("knn", 2), lambda a, b: 1.0)
        # every node has exactly k out-edges
        for nbrs in g.adjacency:
            assert len(nbrs) == 2
        # node 0's nearest two are 1 and 2
        assert sorted(v for v, _ in g.adjacency[0]) == [1, 2]

    def test_complete_graph(self):
        samples = [np.array([float(i)]) for i in range(4)]
        g = planner.build_ndm_graph(samples, ("knn", 3), lambda a, b: 1.0)
        assert sum(len(n) for n in g.adjacency) == 12

    def test_radius_connectivity(self):
        samples = [np.array([0.0]), np.array([1.0]), np.array([3.0])]
        g = planner.build_ndm_graph(samples, ("radius", 1.5), lambda a, b: 1.0)
        assert sorted(v for v, _ in g.adjacency[0]) == [1]
        assert sorted(v for v, _ in g.adjacency[1]) == [0]
        assert g.adjacency[2] == []

    def test_edge_cost_callback_receives_payloads(self):
        samples = [np.array([0.0]), np.array([2.0])]
        g = planner.build_ndm_graph(
            samples, ("knn", 1), lambda a, b: abs(float(b[0] - a[0]))
        )
        assert g.adjacency[0] == [(1, 2.0)]

    def test_negative_cost_names_pair(self):
        samples = [np.array([0.0]), np.array([1.0])]
        with pytest.raises(ValueError, match="samples 0 and 1"):
            planner.build_ndm_graph(samples, ("knn", 1), lambda a, b: -1.0)

    def test_nonfinite_cost_rejected(self):
        samples = [np.array([0.0]), np.array([1.0])]
        with pytest.raises(ValueError, match="samples"):
            planner.build_ndm_graph(samples, ("knn", 1), lambda a, b: math.nan)

    def test_unknown_rule(self):
        with pytest.raises(ValueError, match="connection rule"):
            planner.build_ndm_graph([np.array([0.0])], ("ball", 1), lambda a, b: 1.0)


class TestWaypoints:
    @pytest.mark.parametrize(
        "stride,expected",
        [
            (1, [0, 1, 2, 3, 4]),
            (2, [0, 2, 4]),
            (3, [0, 3, 4]),
            (10, [0, 4]),
        ],
    )
    def test_stride(self, stride, expected):
        assert planner.waypoints([0, 1, 2, 3, 4], stride) == expected

    def test_single_node(self):
        assert planner.waypoints([7], 2) == [7]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            planner.waypoints([], 1)

    def test_bad_stride(self):
        with pytest.raises(ValueError):
            planner.waypoints([0, 1], 0)


class TestGraphIo:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        g = random_graph(rng)
        p = tmp_path / "g.graph"
        planner.save_graph(g, p)
        loaded = planner.load_graph(p)
        assert loaded.n_nodes == g.n_nodes
        assert list(loaded.edges()) == [(u, v, float(f"{w:.10g}")) for u, v, w in g.edges()]

    def test_comments_and_blanks(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("# header\nn 2\n\ne 0 1 1.5  # note\n")
        g = planner.load_graph(p)
        assert g.n_nodes == 2
        assert list(g.edges()) == [(0, 1, 1.5)]

    def test_edge_before_count(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("e 0 1 1.0\n")
        with pytest.raises(planner.GraphFormatError, match="line 1"):
            planner.load_graph(p)

    def test_bad_directive_line_number(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("n 2\nq 0 1\n")
        with pytest.raises(planner.GraphFormatError, match="line 2"):
            planner.load_graph(p)

    def test_negative_weight_reported_with_line(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("n 2\ne 0 1 -3\n")
        with pytest.raises(planner.GraphFormatError, match="line 2"):
            planner.load_graph(p)

    def test_missing_count(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("# nothing\n")
        with pytest.raises(planner.GraphFormatError, match="missing"):
            planner.load_graph(p)

    def test_sssp_csv_format(self):
        g = planner.WeightedDigraph()
        for _ in range(3):
            g.add_node()
        g.add_edge(0, 1, 2.0)
        res = planner.dijkstra(g, 0)
        text = planner.sssp_csv(res)
        lines = text.strip().split("\n")
        assert lines[0] == "node,dist,pred"
        assert lines[1] == "0,0,"
        assert lines[2] == "1,2,0"
        assert lines[3] == "2,inf,"
