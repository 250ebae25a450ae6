"""Tests for typed episode graphs, workspace losses, and explanation chains."""

from pathlib import Path

import numpy as np
import pytest

from maniflow import workspace
from maniflow.workspace import EdgeCoeffs, EdgeKind, Fact, NodeKind, WorkspaceGraph

FIXTURES = Path(__file__).parent / "fixtures"


def small_graph():
    ws = WorkspaceGraph()
    ws.add_node("A", "actor", "Alice")
    ws.add_node("O", "object", "Box")
    ws.add_node("E1", "event", "Pick up")
    ws.add_node("E2", "event", "Place down")
    ws.add_node("S1", "state", "Holding nothing")
    ws.add_node("S2", "state", "Holding box")
    ws.add_node("L", "location", "Room A")
    return ws


class TestEndpointRules:
    def test_all_legal_kinds(self):
        ws = small_graph()
        ws.add_edge("temporal", "S1", "S2", t=1.0)
        ws.add_edge("causal", "E1", "E2")
        ws.add_edge("role-agent", "A", "E1")
        ws.add_edge("role-theme", "O", "E1")
        ws.add_edge("spatial", "S1", "L")
        ws.add_edge("episodic-binding", "S1", "E1")
        ws.add_edge("episodic-binding", "E2", "S2")
        assert len(ws.edges) == 7

    @pytest.mark.parametrize(
        "kind,src,dst",
        [
            ("temporal", "E1", "E2"),
            ("causal", "S1", "S2"),
            ("role-agent", "O", "E1"),
            ("role-theme", "A", "E1"),
            ("spatial", "L", "S1"),
            ("episodic-binding", "A", "E1"),
        ],
    )
    def test_illegal_endpoints(self, kind, src, dst):
        ws = small_graph()
        with pytest.raises(ValueError, match="must connect"):
            ws.add_edge(kind, src, dst)

    def test_missing_endpoint(self):
        ws = small_graph()
        with pytest.raises(ValueError, match="not a node"):
            ws.add_edge("causal", "E1", "E9")

    def test_duplicate_node_id(self):
        ws = small_graph()
        with pytest.raises(ValueError, match="duplicate"):
            ws.add_node("A", "actor", "Another Alice")

    def test_unknown_kind(self):
        ws = WorkspaceGraph()
        with pytest.raises(ValueError):
            ws.add_node("X", "widget", "")


class TestFreezeAndMerge:
    def test_frozen_graph_is_immutable(self):
        ws = small_graph().freeze()
        with pytest.raises(RuntimeError, match="frozen"):
            ws.add_node("B", "actor", "Bob")
        with pytest.raises(RuntimeError, match="frozen"):
            ws.add_edge("causal", "E1", "E2")
        with pytest.raises(RuntimeError, match="frozen"):
            ws.merge_proposals(nodes=[("B", "actor", "Bob")])

    def test_merge_last_write_wins(self):
        ws = small_graph()
        ws.merge_proposals(nodes=[("A", "actor", "Alice, revised")])
        assert ws.nodes["A"].label == "Alice, revised"

    def test_merge_adds_edges(self):
        ws = small_graph()
        ws.merge_proposals(edges=[("temporal", "S1", "S2", 0.5), ("causal", "E1", "E2")])
        assert ws.edges[0].t == 0.5
        assert ws.edges[1].t is None

    def test_merge_revalidates_existing_edges(self):
        ws = small_graph()
        ws.add_edge("causal", "E1", "E2")
        # retyping E2 to a state invalidates the existing causal edge
        with pytest.raises(ValueError, match="must connect"):
            ws.merge_proposals(nodes=[("E2", "state", "now a state")])


class TestFactLoss:
    def test_zero_logit_is_log_two(self):
        loss = workspace.ws_fact_loss(
            np.zeros(1), [Fact("k", 1)], scorer=lambda z, k: 0.0
        )
        np.testing.assert_allclose(loss, np.log(2.0))

    def test_weighted_average(self):
        facts = [Fact("a", 1, weight=2.0), Fact("b", 0, weight=1.0)]
        scorer = lambda z, k: 1.0
        # truth 1: softplus(-1); truth 0: softplus(1)
        expected = (2.0 * np.logaddexp(0.0, -1.0) + np.logaddexp(0.0, 1.0)) / 2.0
        np.testing.assert_allclose(
            workspace.ws_fact_loss(np.zeros(1), facts, scorer), expected
        )

    def test_clamp_at_thirty(self):
        loss = workspace.ws_fact_loss(
            np.zeros(1), [Fact("k", 1)], scorer=lambda z, k: -100.0
        )
        np.testing.assert_allclose(loss, 30.0)

    def test_empty_facts_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            workspace.ws_fact_loss(np.zeros(1), [], scorer=lambda z, k: 0.0)

    def test_fact_validation(self):
        with pytest.raises(ValueError, match="truth"):
            Fact("k", 2)
        with pytest.raises(ValueError, match="weight"):
            Fact("k", 1, weight=-1.0)


class TestGeoLoss:
    def test_sum_of_squared_gaps(self):
        pairs = [
            (np.array([0.0]), np.array([1.0]), 1.0),
            (np.array([0.0]), np.array([3.0]), 2.0),
        ]
        dist = lambda a, b: float(np.linalg.norm(b - a))
        loss = workspace.ws_geo_loss(pairs, f_map=lambda d: d, dist_fn=dist)
        np.testing.assert_allclose(loss, 0.0 + 1.0)

    def test_monotone_check(self):
        pairs = [
            (np.array([0.0]), np.array([1.0]), 1.0),
            (np.array([0.0]), np.array([1.0]), 2.0),
        ]
        dist = lambda a, b: 1.0
        with pytest.raises(ValueError, match="monotone"):
            workspace.ws_geo_loss(pairs, f_map=lambda d: -d, dist_fn=dist)

    def test_constant_map_allowed(self):
        pairs = [(np.zeros(1), np.ones(1), 1.0), (np.zeros(1), np.ones(1), 5.0)]
        workspace.ws_geo_loss(pairs, f_map=lambda d: 2.0, dist_fn=lambda a, b: 2.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="pair"):
            workspace.ws_geo_loss([], f_map=lambda d: d, dist_fn=lambda a, b: 0.0)


class TestEdgeWeight:
    def test_formula(self):
        w = workspace.episodic_edge_weight(2.0, 3.0, 4.0, alpha=1.0, beta=0.5, gamma=0.25)
        np.testing.assert_allclose(w, 2.0 + 1.5 + 1.0)

    @pytest.mark.parametrize(
        "kwargs,name",
        [
            (dict(delta_t=-1.0, jump=0, uncertainty=0, alpha=1, beta=0, gamma=0), "delta_t"),
            (dict(delta_t=0, jump=-1.0, uncertainty=0, alpha=1, beta=0, gamma=0), "jump"),
            (dict(delta_t=0, jump=0, uncertainty=-1.0, alpha=1, beta=0, gamma=0), "uncertainty"),
            (dict(delta_t=0, jump=0, uncertainty=0, alpha=-1.0, beta=0, gamma=0), "alpha"),
            (dict(delta_t=0, jump=0, uncertainty=0, alpha=1, beta=-1.0, gamma=0), "beta"),
            (dict(delta_t=0, jump=0, uncertainty=0, alpha=1, beta=0, gamma=-1.0), "gamma"),
        ],
    )
    def test_negative_inputs_named(self, kwargs, name):
        with pytest.raises(ValueError, match=name):
            workspace.episodic_edge_weight(**kwargs)


class TestLowering:
    def episode(self):
        ws = small_graph()
        ws.add_edge("temporal", "S1", "S2", t=2.0)
        ws.add_edge("causal", "E1", "E2", t=1.5)
        ws.add_edge("role-agent", "A", "E1")
        ws.add_edge("episodic-binding", "S1", "E1")
        return ws

    def test_directed_weighted_edges(self):
        ws = self.episode()
        graph, index = workspace.to_weighted_digraph(ws, EdgeCoeffs())
        edges = {(u, v): w for u, v, w in graph.edges()}
        assert edges[(index["S1"], index["S2"])] == 2.0
        assert (index["S2"], index["S1"]) not in edges
        assert edges[(index["E1"], index["E2"])] == 1.5

    def test_connectors_bidirectional_zero(self):
        ws = self.episode()
        graph, index = workspace.to_weighted_digraph(ws, EdgeCoeffs())
        edges = {(u, v): w for u, v, w in graph.edges()}
        assert edges[(index["A"], index["E1"])] == 0.0
        assert edges[(index["E1"], index["A"])] == 0.0
        assert edges[(index["S1"], index["E1"])] == 0.0
        assert edges[(index["E1"], index["S1"])] == 0.0

    def test_missing_t_weighs_zero(self):
        ws = small_graph()
        ws.add_edge("causal", "E1", "E2")
        graph, index = workspace.to_weighted_digraph(ws, EdgeCoeffs())
        edges = {(u, v): w for u, v, w in graph.edges()}
        assert edges[(index["E1"], index["E2"])] == 0.0

    def test_jump_and_uncertainty_callbacks(self):
        ws = small_graph()
        ws.add_edge("causal", "E1", "E2", t=1.0)
        coeffs = EdgeCoeffs(
            alpha=1.0, beta=2.0, gamma=3.0,
            jump=lambda e: 0.5, uncertainty=lambda e: 0.25,
        )
        graph, index = workspace.to_weighted_digraph(ws, coeffs)
        edges = {(u, v): w for u, v, w in graph.edges()}
        np.testing.assert_allclose(edges[(index["E1"], index["E2"])], 1.0 + 1.0 + 0.75)

    def test_payloads_are_node_ids(self):
        ws = self.episode()
        graph, index = workspace.to_weighted_digraph(ws, EdgeCoeffs())
        for node_id, idx in index.items():
            assert graph.payloads[idx] == node_id


class TestExplanationChain:
    def test_cheapest_chain(self):
        ws = small_graph()
        ws.add_edge("temporal", "S1", "S2", t=2.0)
        ws.add_edge("causal", "E1", "E2", t=1.5)
        ws.add_edge("episodic-binding", "S1", "E1")
        ws.add_edge("episodic-binding", "S2", "E2")
        chain, cost = workspace.explanation_chain(ws, "S1", "E2", EdgeCoeffs())
        # S1 -> E1 (0) -> E2 (1.5) beats S1 -> S2 (2.0) -> E2 (0)
        assert chain == ["S1", "E1", "E2"]
        np.testing.assert_allclose(cost, 1.5)

    def test_unreachable_returns_none(self):
        ws = small_graph()
        assert workspace.explanation_chain(ws, "S1", "S2", EdgeCoeffs()) is None

    def test_unknown_node_raises(self):
        ws = small_graph()
        with pytest.raises(ValueError, match="not a node"):
            workspace.explanation_chain(ws, "S1", "Z9", EdgeCoeffs())


class TestWorkspaceIo:
    def test_load_fixture(self):
        ws = workspace.load_workspace(FIXTURES / "pick_place_episode.txt")
        assert ws.nodes["E1"].label == "Pick up"
        assert ws.nodes["RoomB"].kind == NodeKind.LOCATION
        temporal = [e for e in ws.edges if e.kind == EdgeKind.TEMPORAL]
        assert temporal[0].t == 2.0
        assert len(ws.edges) == 10
        with pytest.raises(RuntimeError, match="frozen"):
            ws.add_node("B", "actor", "Bob")

    def test_fixture_chain(self):
        ws = workspace.load_workspace(FIXTURES / "pick_place_episode.txt")
        chain, cost = workspace.explanation_chain(ws, "S1", "RoomB", EdgeCoeffs())
        assert chain[0] == "S1" and chain[-1] == "RoomB"
        np.testing.assert_allclose(cost, 0.0)

    def test_round_trip(self, tmp_path):
        ws = workspace.load_workspace(FIXTURES / "pick_place_episode.txt")
        p = tmp_path / "episode.txt"
        workspace.save_workspace(ws, p)
        again = workspace.load_workspace(p)
        assert again.nodes.keys() == ws.nodes.keys()
        assert again.edges == ws.edges
        assert again.nodes["O"].label == "Box"

    def test_parse_error_line_number(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("node A actor Alice\nedge causal A A\n")
        with pytest.raises(ValueError, match="line 2"):
            workspace.load_workspace(p)

    def test_bad_t_field(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text(
            "node S1 state a\nnode S2 state b\nedge temporal S1 S2 dt=2\n"
        )
        with pytest.raises(ValueError, match="line 3"):
            workspace.load_workspace(p)

    def test_unknown_directive(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("vertex A actor Alice\n")
        with pytest.raises(ValueError, match="directive"):
            workspace.load_workspace(p)
