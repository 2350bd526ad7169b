"""Shared fixtures helpers and independent oracle implementations.

Every oracle here is written from the textbook definition, not by calling the
library code it checks: set-based BFS closure, full-sort nearest neighbors,
subset-enumeration Steiner and densest-subgraph optima, dense linear-solve
PageRank, and hand-rolled MST/connectivity utilities.
"""

from __future__ import annotations

import numpy as np

from subrag.graph import Graph, Subgraph, build_graph


def random_graph(
    rng,
    n: int,
    p: float,
    weighted: bool = False,
    connected: bool = False,
    directed: bool = False,
) -> Graph:
    """Seeded Erdos-Renyi-style graph; optionally force connectivity by
    threading a random spanning path through all nodes."""
    edges = {}
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges[(u, v)] = rng.uniform(0.1, 2.0) if weighted else None
    if connected and n > 1:
        perm = rng.permutation(n)
        for a, b in zip(perm[:-1], perm[1:]):
            key = (min(a, b), max(a, b))
            if key not in edges:
                edges[key] = rng.uniform(0.1, 2.0) if weighted else None
    if weighted:
        edge_list = [(u, v, w) for (u, v), w in edges.items()]
    else:
        edge_list = list(edges.keys())
    return build_graph(edge_list, node_count=n, directed=directed)


def adjacency_sets(g: Graph) -> list:
    return [set(g.neighbors[g.offsets[u] : g.offsets[u + 1]].tolist()) for u in range(g.node_count)]


def edge_set(g: Graph) -> set:
    """Canonical (u, v[, w]) edge set of a graph."""
    out = set()
    for u in range(g.node_count):
        for pos in range(g.offsets[u], g.offsets[u + 1]):
            v = int(g.neighbors[pos])
            if not g.directed and v < u:
                continue
            a, b = (u, v) if (g.directed or u < v) else (v, u)
            if g.weights is None:
                out.add((a, b))
            else:
                out.add((a, b, float(g.weights[pos])))
    return out


def bfs_closure_oracle(g: Graph, seeds, hops: int) -> set:
    """Textbook set-based BFS closure (no caps)."""
    adj = adjacency_sets(g)
    visited = set(int(s) for s in seeds)
    frontier = set(visited)
    for _ in range(hops):
        nxt = set()
        for u in frontier:
            nxt |= adj[u]
        nxt -= visited
        if not nxt:
            break
        visited |= nxt
        frontier = nxt
    return visited


def brute_knn_oracle(matrix: np.ndarray, metric: str, query: np.ndarray, k: int, exclude=None):
    """Full-sort top-k with the library's scoring definition applied directly."""
    dots = matrix @ query
    if metric == "dot":
        scores = dots
    else:
        norms = np.sqrt(np.einsum("ij,ij->i", matrix, matrix))
        qn = float(np.sqrt(query @ query))
        if qn == 0.0:
            scores = np.zeros(matrix.shape[0])
        else:
            safe = np.where(norms == 0.0, 1.0, norms)
            scores = dots / (safe * qn)
            scores[norms == 0.0] = 0.0
    excluded = set(int(e) for e in exclude) if exclude else set()
    candidates = [i for i in range(matrix.shape[0]) if i not in excluded]
    ranked = sorted(candidates, key=lambda i: (-scores[i], i))
    take = min(k, len(candidates))
    return [(i, float(scores[i])) for i in ranked[:take]]


def mst_weight_of_subset(g: Graph, subset) -> float:
    """Prim MST weight over the induced subgraph; inf when disconnected."""
    nodes = sorted(set(int(x) for x in subset))
    node_set = set(nodes)
    if len(nodes) == 1:
        return 0.0
    import heapq

    start = nodes[0]
    seen = {start}
    heap = []
    for pos in range(g.offsets[start], g.offsets[start + 1]):
        v = int(g.neighbors[pos])
        if v in node_set:
            heapq.heappush(heap, (g.weight_of_arc(pos), v))
    total = 0.0
    while heap and len(seen) < len(nodes):
        w, v = heapq.heappop(heap)
        if v in seen:
            continue
        seen.add(v)
        total += w
        for pos in range(g.offsets[v], g.offsets[v + 1]):
            x = int(g.neighbors[pos])
            if x in node_set and x not in seen:
                heapq.heappush(heap, (g.weight_of_arc(pos), x))
    return total if len(seen) == len(nodes) else float("inf")


def exact_steiner_weight_oracle(g: Graph, terminals) -> float:
    """Exact minimum Steiner tree weight by enumerating optional node sets."""
    terminals = sorted(set(int(t) for t in terminals))
    others = [v for v in range(g.node_count) if v not in terminals]
    best = float("inf")
    for bits in range(1 << len(others)):
        subset = list(terminals)
        for i, v in enumerate(others):
            if bits >> i & 1:
                subset.append(v)
        w = mst_weight_of_subset(g, subset)
        if w < best:
            best = w
    return best


def densest_seed_subset_oracle(g: Graph, seeds) -> float:
    """Max |E|/|V| over every subset containing the seeds (gray-code walk)."""
    n = g.node_count
    adj_bits = [0] * n
    for u in range(n):
        for pos in range(g.offsets[u], g.offsets[u + 1]):
            adj_bits[u] |= 1 << int(g.neighbors[pos])
    seeds = sorted(set(int(s) for s in seeds))
    free = [v for v in range(n) if v not in seeds]
    mask = 0
    for s in seeds:
        mask |= 1 << s
    edges = 0
    for s in seeds:
        edges += (adj_bits[s] & mask).bit_count()
    edges //= 2
    best = edges / len(seeds)
    in_subset = 0
    for i in range(1, 1 << len(free)):
        flip = (i & -i).bit_length() - 1
        v = free[flip]
        bit = 1 << v
        if in_subset >> flip & 1:
            mask ^= bit
            in_subset ^= 1 << flip
            edges -= (adj_bits[v] & mask).bit_count()
        else:
            edges += (adj_bits[v] & mask).bit_count()
            mask |= bit
            in_subset |= 1 << flip
        best = max(best, edges / mask.bit_count())
    return best


def community_fixture(seed, n_per=20, communities=3, d=6, p_in=0.5, p_out=0.02, noise=0.1):
    """Connected graph with block structure and community-correlated features.

    Returns (graph, attrs, observed) where ``observed`` is a second,
    unmasked modality correlated with the same communities.
    """
    from subrag.graph import NodeAttributes

    rng = np.random.default_rng(seed)
    n = n_per * communities
    label = np.repeat(np.arange(communities), n_per)
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            p = p_in if label[u] == label[v] else p_out
            if rng.random() < p:
                edges.append((u, v))
    # thread a path through each community, then chain communities: connected
    for c in range(communities):
        base = c * n_per
        for i in range(n_per - 1):
            edges.append((base + i, base + i + 1))
        if c + 1 < communities:
            edges.append((base + n_per - 1, base + n_per))
    g = build_graph(edges, node_count=n)
    centroids = rng.standard_normal((communities, d)) * 2.0
    feats = centroids[label] + noise * rng.standard_normal((n, d))
    observed = centroids[label][:, ::-1] + noise * rng.standard_normal((n, d))
    attrs = NodeAttributes(node_count=n, features=feats, labels=label)
    return g, attrs, observed


def ppr_dense_oracle(g: Graph, seeds, alpha: float) -> np.ndarray:
    """Fixed point of the restart walk via a dense linear solve."""
    n = g.node_count
    W = np.zeros((n, n))
    for u in range(n):
        deg = g.offsets[u + 1] - g.offsets[u]
        for pos in range(g.offsets[u], g.offsets[u + 1]):
            W[u, int(g.neighbors[pos])] = 1.0 / deg
    r = np.zeros(n)
    seeds = sorted(set(int(s) for s in seeds))
    r[seeds] = 1.0 / len(seeds)
    dangling = np.diff(g.offsets) == 0
    T = W + np.outer(dangling.astype(float), r)
    A = np.eye(n) - (1.0 - alpha) * T.T
    return alpha * np.linalg.solve(A, r)


def is_tree_spanning(sub: Subgraph, terminals) -> bool:
    """Connected, acyclic, and containing every terminal."""
    nodes = set(sub.nodes.tolist())
    if not set(int(t) for t in terminals) <= nodes:
        return False
    if sub.edge_count != len(nodes) - 1:
        return False
    parent = {u: u for u in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in zip(sub.edge_src.tolist(), sub.edge_dst.tolist()):
        ru, rv = find(u), find(v)
        if ru == rv:
            return False
        parent[ru] = rv
    roots = {find(u) for u in nodes}
    return len(roots) == 1


def assert_subgraph_equal(a: Subgraph, b: Subgraph) -> None:
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.edge_src, b.edge_src)
    assert np.array_equal(a.edge_dst, b.edge_dst)
    if a.edge_weight is None or b.edge_weight is None:
        assert a.edge_weight is None and b.edge_weight is None
    else:
        assert np.array_equal(a.edge_weight, b.edge_weight)
    assert a.provenance.method == b.provenance.method
    assert a.provenance.seeds == b.provenance.seeds
    assert np.array_equal(a.provenance.scores, b.provenance.scores)
