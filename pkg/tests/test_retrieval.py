import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.csgraph import floyd_warshall
from hypothesis import given, settings
from hypothesis import strategies as st

from subrag.graph import build_graph, validate_subgraph
from subrag.index import RetrievalHit
from subrag.retrieval import (
    FailedQuery,
    NodeFilter,
    RetrievalConfig,
    ScratchSpace,
    batch_bfs_nodes,
    batch_retrieve,
    bfs_expand,
    dense_subgraph,
    filter_nodes,
    multi_source_distances,
    ppr_scores,
    steiner_subgraph,
)

from helpers import (
    assert_subgraph_equal,
    bfs_closure_oracle,
    ppr_dense_oracle,
    random_graph,
)


class TestBfsExpand:
    def test_path_one_hop(self, path4):
        sub = bfs_expand(path4, [0], hops=1)
        assert sub.nodes.tolist() == [0, 1]
        assert sub.provenance.method == "bfs"

    def test_path_three_hops(self, path4):
        sub = bfs_expand(path4, [0], hops=3)
        assert sub.nodes.tolist() == [0, 1, 2, 3]

    def test_zero_hops_keeps_seeds(self, path4):
        sub = bfs_expand(path4, [1, 3], hops=0)
        assert sub.nodes.tolist() == [1, 3]

    def test_matches_reference_closure(self):
        rng = np.random.default_rng(33)
        for _ in range(15):
            g = random_graph(rng, n=50, p=0.08)
            seeds = sorted(rng.choice(50, size=3, replace=False).tolist())
            sub = bfs_expand(g, seeds, hops=2)
            assert set(sub.nodes.tolist()) == bfs_closure_oracle(g, seeds, 2)
            validate_subgraph(sub)

    def test_fanout_cap_keeps_lowest_ids(self, star5):
        sub = bfs_expand(star5, [0], hops=1, fanout_cap=2)
        assert sub.nodes.tolist() == [0, 1, 2]

    def test_max_nodes_never_drops_seeds(self, star5):
        sub = bfs_expand(star5, [0, 4], hops=1, max_nodes=2)
        assert sub.nodes.tolist() == [0, 4]

    def test_depth_scores(self, path4):
        sub = bfs_expand(path4, [0], hops=3)
        assert sub.provenance.scores.tolist() == [1.0, 0.5, 1 / 3, 0.25]

    def test_seed_scores_override(self, path4):
        sub = bfs_expand(path4, [0], hops=1, seed_scores={0: 0.9})
        assert sub.provenance.scores.tolist() == [0.9, 0.5]

    def test_empty_seeds_error(self, path4):
        with pytest.raises(ValueError, match="nonempty"):
            bfs_expand(path4, [], hops=1)

    def test_seed_out_of_range(self, path4):
        with pytest.raises(ValueError, match="out of range"):
            bfs_expand(path4, [9], hops=1)


class TestBatchBfsNodes:
    def test_matches_bfs_expand_per_query(self):
        rng = np.random.default_rng(44)
        g = random_graph(rng, n=80, p=0.06)
        seed_sets = [
            sorted(rng.choice(80, size=int(rng.integers(1, 4)), replace=False).tolist())
            for _ in range(30)
        ]
        cap = 3
        got = batch_bfs_nodes(g, seed_sets, hops=2, fanout_cap=cap, max_nodes=20)
        for seeds, nodes in zip(seed_sets, got):
            want = bfs_expand(g, seeds, hops=2, fanout_cap=cap, max_nodes=20)
            assert nodes.tolist() == want.nodes.tolist()

    def test_uniform_array_input_equals_list_input(self):
        rng = np.random.default_rng(45)
        g = random_graph(rng, n=60, p=0.08)
        arr = rng.integers(0, 60, size=(25, 2)).astype(np.int64)
        arr[:, 1] = (arr[:, 0] + 1 + arr[:, 1]) % 60  # avoid duplicate seeds
        as_array = batch_bfs_nodes(g, arr, hops=2)
        as_lists = batch_bfs_nodes(g, [row.tolist() for row in arr], hops=2)
        for a, b in zip(as_array, as_lists):
            assert a.tolist() == b.tolist()

    def test_buffer_growth_preserves_results(self):
        rng = np.random.default_rng(46)
        g = random_graph(rng, n=300, p=0.04)
        seeds = [[int(rng.integers(300))] for _ in range(200)]
        scratch = ScratchSpace(g.node_count)
        got = batch_bfs_nodes(g, seeds, hops=3, scratch=scratch)
        for s, nodes in zip(seeds, got):
            assert nodes.tolist() == bfs_expand(g, s, hops=3).nodes.tolist()

    def test_empty_batch(self, path4):
        assert batch_bfs_nodes(path4, [], hops=1) == []

    def test_invalid_seed_rejected(self, path4):
        with pytest.raises(ValueError, match="out of range"):
            batch_bfs_nodes(path4, [[0], [9]], hops=1)


class TestMultiSourceDistances:
    def test_path_from_zero(self, path4):
        res = multi_source_distances(path4, [0])
        assert res.distances.tolist() == [0.0, 1.0, 2.0, 3.0]
        assert res.parents.tolist() == [-1, 0, 1, 2]
        assert res.nearest_source.tolist() == [0, 0, 0, 0]

    def test_disconnected_is_inf(self):
        g = build_graph([(0, 1)], node_count=3)
        res = multi_source_distances(g, [0])
        assert res.distances[2] == np.inf
        assert res.nearest_source[2] == -1

    def test_multiple_sources(self, path4):
        res = multi_source_distances(path4, [0, 3])
        assert res.distances.tolist() == [0.0, 1.0, 1.0, 0.0]
        assert res.nearest_source.tolist() == [0, 0, 3, 3]

    @pytest.mark.parametrize("weighted", [False, True])
    def test_matches_floyd_warshall(self, weighted):
        rng = np.random.default_rng(55)
        for _ in range(10):
            g = random_graph(rng, n=30, p=0.12, weighted=weighted, connected=False)
            dense = np.zeros((30, 30))
            for u in range(30):
                for pos in range(g.offsets[u], g.offsets[u + 1]):
                    dense[u, int(g.neighbors[pos])] = g.weight_of_arc(pos)
            fw = floyd_warshall(sp.csr_matrix(dense), directed=False)
            sources = sorted(rng.choice(30, size=3, replace=False).tolist())
            res = multi_source_distances(g, sources)
            want = fw[sources].min(axis=0)
            assert np.allclose(res.distances, want, equal_nan=False)

    def test_parent_chain_reaches_nearest_source(self):
        rng = np.random.default_rng(9)
        g = random_graph(rng, n=25, p=0.15, weighted=True, connected=True)
        res = multi_source_distances(g, [0, 7])
        for v in range(25):
            u = v
            hopcount = 0
            while res.parents[u] != -1:
                u = int(res.parents[u])
                hopcount += 1
                assert hopcount <= 25
            assert u == res.nearest_source[v]


class TestFilterNodes:
    def _hits(self, scores):
        return [RetrievalHit(node=i, score=s) for i, s in enumerate(scores)]

    def test_top_k(self):
        hits = self._hits([0.9, 0.8, 0.7, 0.6, 0.5])
        assert filter_nodes(hits, NodeFilter.top_k(2)) == hits[:2]

    def test_threshold_inf_empty(self):
        hits = self._hits([0.9, 0.8])
        assert filter_nodes(hits, NodeFilter.by_threshold(float("inf"))) == []

    def test_none_keeps_all(self):
        hits = self._hits([0.5])
        assert filter_nodes(hits, NodeFilter.none()) == hits

    @given(
        scores=st.lists(
            st.floats(min_value=-1, max_value=1, allow_nan=False), max_size=30
        ),
        threshold=st.floats(min_value=-1, max_value=1, allow_nan=False),
    )
    @settings(max_examples=100, deadline=None)
    def test_threshold_matches_comprehension(self, scores, threshold):
        scores = sorted(scores, reverse=True)
        hits = self._hits(scores)
        got = filter_nodes(hits, NodeFilter.by_threshold(threshold))
        assert got == [h for h in hits if h.score >= threshold]

    def test_top_k_never_empty_on_nonempty_input(self):
        hits = self._hits([0.1])
        assert filter_nodes(hits, NodeFilter.top_k(5)) == hits


class TestPprScores:
    def test_single_node(self):
        g = build_graph([], node_count=1)
        assert ppr_scores(g, [0]).tolist() == [1.0]

    def test_k2_restart_bias(self):
        g = build_graph([(0, 1)], node_count=2)
        p = ppr_scores(g, [0], alpha=0.5, iters=80)
        assert p[0] > p[1]
        assert abs(p.sum() - 1.0) < 1e-9

    def test_matches_dense_solve(self):
        rng = np.random.default_rng(77)
        for _ in range(8):
            g = random_graph(rng, n=20, p=0.15)
            seeds = sorted(rng.choice(20, size=2, replace=False).tolist())
            got = ppr_scores(g, seeds, alpha=0.15, iters=200)
            want = ppr_dense_oracle(g, seeds, alpha=0.15)
            assert np.allclose(got, want, atol=1e-6)
            assert abs(got.sum() - 1.0) < 1e-9

    def test_seed_dominates_on_vertex_transitive_graph(self):
        # cycle C8: all nodes equivalent except for the restart
        n = 8
        g = build_graph([(i, (i + 1) % n) for i in range(n)], node_count=n)
        p = ppr_scores(g, [3], alpha=0.2, iters=150)
        assert p[3] == p.max()

    def test_invalid_alpha(self, path3):
        with pytest.raises(ValueError, match="alpha"):
            ppr_scores(path3, [0], alpha=0.0)


class TestBatchRetrieve:
    def _cfg(self, method, **kw):
        return RetrievalConfig(method=method, **kw)

    def test_batch_of_one_equals_single(self, path4):
        cfg = self._cfg("bfs", hops=2)
        got = batch_retrieve(path4, [[0]], cfg)
        assert_subgraph_equal(got[0], bfs_expand(path4, [0], hops=2))

    def test_empty_batch(self, path4):
        assert batch_retrieve(path4, [], self._cfg("bfs")) == []

    @pytest.mark.parametrize("method", ["bfs", "steiner", "dense"])
    @pytest.mark.parametrize("workers", [1, 2, 8])
    def test_batch_equals_sequential(self, method, workers):
        rng = np.random.default_rng(123)
        g = random_graph(rng, n=60, p=0.08, connected=True)
        seed_sets = [
            sorted(rng.choice(60, size=int(rng.integers(1, 4)), replace=False).tolist())
            for _ in range(40)
        ]
        cfg = self._cfg(method, hops=2, max_nodes=25)
        got = batch_retrieve(g, seed_sets, cfg, workers=workers)
        scratch = ScratchSpace(g.node_count)
        for i, seeds in enumerate(seed_sets):
            single = batch_retrieve(g, [seeds], cfg, scratch=scratch)[0]
            assert_subgraph_equal(got[i], single)

    def test_failed_query_does_not_abort_batch(self):
        g = build_graph([(0, 1), (2, 3)], node_count=4)
        cfg = self._cfg("steiner")
        results = batch_retrieve(g, [[0, 1], [0, 3], [2, 3]], cfg)
        assert results[0].provenance.method == "steiner"
        assert isinstance(results[1], FailedQuery)
        assert results[1].index == 1
        assert "different connected components" in results[1].error
        assert results[2].provenance.method == "steiner"

    def test_scratch_allocation_constant_across_large_batch(self):
        rng = np.random.default_rng(5)
        g = random_graph(rng, n=300, p=0.02, connected=True)
        seeds = [[int(rng.integers(300))] for _ in range(10_000)]
        scratch = ScratchSpace(g.node_count)
        cfg = self._cfg("bfs", hops=2)
        batch_retrieve(g, seeds[:20], cfg, scratch=scratch)
        after_warmup = scratch.alloc_count
        batch_retrieve(g, seeds, cfg, scratch=scratch)
        assert scratch.alloc_count == after_warmup
        assert scratch.epoch >= 10_000

    def test_epoch_strictly_increases_per_query(self, path4):
        scratch = ScratchSpace(path4.node_count)
        cfg = self._cfg("bfs", hops=1)
        epochs = []
        for _ in range(5):
            batch_retrieve(path4, [[0]], cfg, scratch=scratch)
            epochs.append(scratch.epoch)
        assert epochs == sorted(set(epochs))
