import numpy as np
import pytest

from subrag.graph import (
    build_graph,
    induced_subgraph,
    neighbors,
    validate,
    validate_subgraph,
)

from helpers import edge_set, random_graph


class TestBuildGraph:
    def test_path3_degrees(self, path3):
        assert path3.degrees().tolist() == [1, 2, 1]
        validate(path3)

    def test_empty_graph(self):
        g = build_graph([], node_count=4)
        assert g.node_count == 4
        assert g.edge_count == 0
        validate(g)

    def test_duplicates_collapse_and_symmetrize(self):
        g = build_graph([(0, 1), (1, 0), (0, 1)], node_count=2)
        assert g.degrees().tolist() == [1, 1]
        assert g.edge_count == 1

    def test_first_weight_wins(self):
        g = build_graph([(0, 1, 2.0), (1, 0, 5.0)], node_count=2)
        assert g.edge_weight(0, 1) == 2.0
        assert g.edge_weight(1, 0) == 2.0

    def test_directed_keeps_both_arcs_distinct(self):
        g = build_graph([(0, 1, 2.0), (1, 0, 5.0)], node_count=2, directed=True)
        assert g.edge_weight(0, 1) == 2.0
        assert g.edge_weight(1, 0) == 5.0

    def test_endpoint_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            build_graph([(0, 3)], node_count=3)

    def test_negative_weight(self):
        with pytest.raises(ValueError, match="negative weight"):
            build_graph([(0, 1, -1.0)], node_count=2)

    def test_zero_nodes_with_edges(self):
        with pytest.raises(ValueError, match="node_count"):
            build_graph([(0, 1)], node_count=0)

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError, match="self-loop"):
            build_graph([(1, 1)], node_count=2)

    def test_degree_sum_is_twice_edges(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            g = random_graph(rng, n=int(rng.integers(2, 30)), p=0.3)
            assert int(g.degrees().sum()) == 2 * g.edge_count
            validate(g)


class TestNeighbors:
    def test_path_middle(self, path3):
        assert neighbors(path3, 1).tolist() == [0, 2]

    def test_isolated(self):
        g = build_graph([], node_count=2)
        assert neighbors(g, 0).tolist() == []

    def test_star_center(self, star5):
        assert neighbors(star5, 0).tolist() == [1, 2, 3, 4]

    def test_out_of_range(self, path3):
        with pytest.raises(ValueError):
            neighbors(path3, 3)


class TestInducedSubgraph:
    def test_triangle_from_pendant_graph(self, triangle_pendant):
        sub = induced_subgraph(triangle_pendant, {0, 1, 2})
        assert sub.edge_count == 3
        assert sub.provenance.method == "induced"
        validate_subgraph(sub)

    def test_single_node(self, triangle_pendant):
        sub = induced_subgraph(triangle_pendant, {1})
        assert sub.edge_count == 0
        assert sub.nodes.tolist() == [1]

    def test_matches_brute_force_filter(self):
        rng = np.random.default_rng(42)
        g = random_graph(rng, n=20, p=0.3)
        chosen = sorted(rng.choice(20, size=8, replace=False).tolist())
        sub = induced_subgraph(g, chosen)
        want = {
            (u, v)
            for (u, v) in edge_set(g)
            if u in set(chosen) and v in set(chosen)
        }
        got = {(u, v) for u, v in zip(sub.edge_src.tolist(), sub.edge_dst.tolist())}
        assert got == want
        validate_subgraph(sub)

    def test_all_nodes_reproduces_graph(self):
        rng = np.random.default_rng(3)
        g = random_graph(rng, n=15, p=0.25, weighted=True)
        sub = induced_subgraph(g, range(15))
        got = {
            (u, v, w)
            for u, v, w in zip(
                sub.edge_src.tolist(), sub.edge_dst.tolist(), sub.edge_weight.tolist()
            )
        }
        assert got == edge_set(g)

    def test_node_out_of_range(self, path3):
        with pytest.raises(ValueError):
            induced_subgraph(path3, {0, 5})


class TestImmutability:
    def test_arrays_read_only(self, path3):
        with pytest.raises(ValueError):
            path3.offsets[0] = 5
        with pytest.raises(ValueError):
            path3.neighbors[0] = 2

    def test_uniform_weight_detection(self):
        g = build_graph([(0, 1, 2.0), (1, 2, 2.0)], node_count=3)
        assert g.uniform_weight == 2.0
        g2 = build_graph([(0, 1, 1.0), (1, 2, 2.0)], node_count=3)
        assert g2.uniform_weight is None
        g3 = build_graph([(0, 1)], node_count=2)
        assert g3.uniform_weight == 1.0
