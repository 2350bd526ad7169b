"""Batched subgraph retrieval kernels.

Five ways to grow context around seed nodes: bounded BFS expansion, Steiner
trees (metric-closure 2-approximation), dense subgraphs (greedy peeling),
multi-source shortest paths, and personalized PageRank, plus score filtering.
Batch entry points reuse epoch-stamped scratch buffers across queries so a
10,000-query batch allocates no more than a single query does.

Tie-break contract (shared with the naive reference implementations in
``bench``): neighbor scans run in ascending id; unit-weight traversals claim
nodes in admission order; weighted traversals pop a (distance, node) heap and
re-parent only on strict improvement.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .graph import Graph, Provenance, Subgraph, _induced_edges
from .index import RetrievalHit

__all__ = [
    "NodeFilter",
    "RetrievalConfig",
    "ScratchSpace",
    "FailedQuery",
    "DistanceResult",
    "bfs_expand",
    "batch_bfs_nodes",
    "multi_source_distances",
    "steiner_subgraph",
    "dense_subgraph",
    "filter_nodes",
    "ppr_scores",
    "batch_retrieve",
]

_UNBOUNDED = np.iinfo(np.int64).max // 4
_STEINER_MATRIX_MAX_TERMINALS = 16
_NONSEED_STEINER_SCORE = 0.5


@dataclass(frozen=True)
class NodeFilter:
    """Candidate trimming rule: keep everything, the top k, or scores >= t."""

    kind: str = "none"  # none | top_k | threshold
    k: Optional[int] = None
    threshold: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("none", "top_k", "threshold"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.kind == "top_k" and (self.k is None or self.k < 1):
            raise ValueError("top_k filter needs k >= 1")
        if self.kind == "threshold":
            if self.threshold is None or np.isnan(self.threshold):
                raise ValueError("threshold filter needs a numeric threshold")

    @staticmethod
    def none() -> "NodeFilter":
        return NodeFilter()

    @staticmethod
    def top_k(k: int) -> "NodeFilter":
        return NodeFilter(kind="top_k", k=k)

    @staticmethod
    def by_threshold(t: float) -> "NodeFilter":
        return NodeFilter(kind="threshold", threshold=t)


@dataclass(frozen=True)
class RetrievalConfig:
    """Which construction method to run and its budgets.

    ``hops`` doubles as the candidate-pool radius for the dense method;
    ``fanout_cap``/``max_nodes`` of None mean unbounded.
    """

    method: str = "bfs"  # bfs | steiner | dense
    hops: int = 2
    fanout_cap: Optional[int] = None
    max_nodes: Optional[int] = None
    filter: NodeFilter = field(default_factory=NodeFilter)
    ppr_alpha: float = 0.15
    ppr_iters: int = 50

    def __post_init__(self):
        if self.method not in ("bfs", "steiner", "dense"):
            raise ValueError(f"unknown retrieval method {self.method!r}")
        if self.hops < 1:
            raise ValueError("hops must be >= 1")
        if self.fanout_cap is not None and self.fanout_cap < 1:
            raise ValueError("fanout_cap must be >= 1")
        if self.max_nodes is not None and self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if not (0.0 < self.ppr_alpha <= 1.0):
            raise ValueError("ppr_alpha must lie in (0, 1]")
        if self.ppr_iters < 1:
            raise ValueError("ppr_iters must be >= 1")


class ScratchSpace:
    """Reusable per-worker traversal buffers.

    Buffers are epoch-stamped: bumping ``epoch`` invalidates every prior
    visit mark without clearing memory, which is what keeps allocation count
    constant across arbitrarily long query batches. Not shareable between
    concurrent queries; give each worker its own instance.
    """

    def __init__(self, node_count: int):
        self.node_count = node_count
        self.epoch = 0
        self.alloc_count = 0
        self._vectors: dict = {}
        self._matrices: dict = {}

    def next_epoch(self) -> int:
        self.epoch += 1
        return self.epoch

    def reserve_epochs(self, count: int) -> int:
        """Claim a contiguous epoch range for a batch; returns its base."""
        base = self.epoch + 1
        self.epoch += count
        return base

    def vector(self, name: str, dtype=np.int64) -> np.ndarray:
        buf = self._vectors.get(name)
        if buf is None:
            buf = np.zeros(self.node_count, dtype=dtype)
            self._vectors[name] = buf
            self.alloc_count += 1
        return buf

    def matrix(self, name: str, rows: int, dtype=np.int64) -> np.ndarray:
        buf = self._matrices.get(name)
        if buf is None or buf.shape[0] < rows:
            buf = np.zeros((rows, self.node_count), dtype=dtype)
            self._matrices[name] = buf
            self.alloc_count += 1
        return buf

    def work_buffer(self, name: str, min_size: int, preserve: int = 0) -> np.ndarray:
        """Arbitrary-size reusable buffer, doubled on growth; the first
        ``preserve`` entries survive reallocation."""
        buf = self._matrices.get(("buffer", name))
        if buf is None or buf.shape[0] < min_size:
            grown = np.empty(
                max(min_size, 2 * (buf.shape[0] if buf is not None else 0)),
                dtype=np.int64,
            )
            if buf is not None and preserve:
                grown[:preserve] = buf[:preserve]
            self._matrices[("buffer", name)] = grown
            self.alloc_count += 1
            buf = grown
        return buf


@dataclass(frozen=True)
class FailedQuery:
    """Per-query failure inside a batch; other queries still complete."""

    index: int
    error: str


@dataclass(frozen=True)
class DistanceResult:
    """Weighted shortest-path distances from a source set.

    Unreachable nodes carry ``inf`` distance and -1 in both id arrays.
    ``parents`` point one step back toward the nearest source.
    """

    distances: np.ndarray
    nearest_source: np.ndarray
    parents: np.ndarray


def _prep_seeds(g: Graph, seeds: Iterable[int]) -> np.ndarray:
    arr = np.unique(np.asarray(list(seeds), dtype=np.int64))
    if arr.size == 0:
        raise ValueError("seed set must be nonempty")
    if arr[0] < 0 or arr[-1] >= g.node_count:
        bad = arr[0] if arr[0] < 0 else arr[-1]
        raise ValueError(f"seed {bad} out of range [0, {g.node_count})")
    return arr


def _apply_seed_scores(
    nodes: np.ndarray, scores: np.ndarray, seeds: np.ndarray, seed_scores
) -> None:
    if seed_scores is None:
        return
    pos = np.searchsorted(nodes, seeds)
    for p, s in zip(pos, seeds):
        val = seed_scores.get(int(s))
        if val is not None:
            scores[p] = float(val)


# ---------------------------------------------------------------------------
# BFS expansion
# ---------------------------------------------------------------------------


def bfs_expand(
    g: Graph,
    seeds: Iterable[int],
    hops: int,
    fanout_cap: Optional[int] = None,
    max_nodes: Optional[int] = None,
    seed_scores: Optional[dict] = None,
    scratch: Optional[ScratchSpace] = None,
) -> Subgraph:
    """Grow a subgraph by bounded breadth-first expansion from ``seeds``.

    Each dequeued node admits at most ``fanout_cap`` of its lowest-id
    unvisited neighbors; admission stops globally at ``max_nodes`` but seeds
    are never dropped. Edges are the induced edges among the kept nodes.
    Non-seed relevance scores decay with depth as 1 / (1 + depth).
    """
    seed_arr = _prep_seeds(g, seeds)
    if hops < 0:
        raise ValueError("hops must be >= 0")
    if fanout_cap is not None and fanout_cap < 1:
        raise ValueError("fanout_cap must be >= 1")
    if max_nodes is not None and max_nodes < 1:
        raise ValueError("max_nodes must be >= 1")
    scratch = scratch or ScratchSpace(g.node_count)
    stamp = scratch.vector("stamp")
    depth = scratch.vector("depth")
    order = scratch.vector("order")
    epoch = scratch.next_epoch()
    cnt = _kernels.bfs_expand_kernel(
        g.offsets,
        g.neighbors,
        stamp,
        depth,
        order,
        epoch,
        seed_arr,
        hops,
        _UNBOUNDED if fanout_cap is None else fanout_cap,
        _UNBOUNDED if max_nodes is None else max_nodes,
    )
    nodes = np.empty(cnt, dtype=np.int64)
    depths = np.empty(cnt, dtype=np.int64)
    visited = order[:cnt]
    bound = int((g.offsets[visited + 1] - g.offsets[visited]).sum())
    eu = np.empty(bound, dtype=np.int64)
    ev = np.empty(bound, dtype=np.int64)
    pos = np.empty(bound, dtype=np.int64)
    ecnt = _kernels.finalize_bfs_kernel(
        g.offsets,
        g.neighbors,
        stamp,
        depth,
        order,
        epoch,
        cnt,
        g.directed,
        nodes,
        depths,
        eu,
        ev,
        pos,
    )
    scores = 1.0 / (1.0 + depths.astype(np.float64))
    _apply_seed_scores(nodes, scores, seed_arr, seed_scores)
    return Subgraph(
        parent=g,
        nodes=nodes,
        edge_src=eu[:ecnt].copy(),
        edge_dst=ev[:ecnt].copy(),
        edge_weight=None if g.weights is None else g.weights[pos[:ecnt]],
        provenance=Provenance(
            seeds=tuple(int(s) for s in seed_arr), method="bfs", scores=scores
        ),
    )


def batch_bfs_nodes(
    g: Graph,
    seed_sets: Sequence[Iterable[int]],
    hops: int,
    fanout_cap: Optional[int] = None,
    max_nodes: Optional[int] = None,
    scratch: Optional[ScratchSpace] = None,
) -> list:
    """Membership-only batched BFS: one sorted node-id array per seed set.

    Same admission semantics as ``bfs_expand`` but skips edge extraction and
    per-query dispatch entirely: the whole batch runs inside one compiled
    driver writing into a shared buffer. This is the bulk kernel the
    benchmark times against the naive per-query reference.
    """
    if hops < 0:
        raise ValueError("hops must be >= 0")
    if fanout_cap is not None and fanout_cap < 1:
        raise ValueError("fanout_cap must be >= 1")
    if max_nodes is not None and max_nodes < 1:
        raise ValueError("max_nodes must be >= 1")
    if isinstance(seed_sets, np.ndarray) and seed_sets.ndim == 2:
        # uniform seed counts: validate and sort the whole batch at once
        arr = np.ascontiguousarray(seed_sets, dtype=np.int64)
        nq = arr.shape[0]
        if nq == 0:
            return []
        if arr.shape[1] < 1:
            raise ValueError("seed set must be nonempty")
        if arr.min() < 0 or arr.max() >= g.node_count:
            raise ValueError(
                f"seed {int(arr.min() if arr.min() < 0 else arr.max())} "
                f"out of range [0, {g.node_count})"
            )
        arr = np.sort(arr, axis=1)
        if arr.shape[1] > 1 and np.any(arr[:, 1:] == arr[:, :-1]):
            raise ValueError("seed sets must not contain duplicates")
        seeds_flat = arr.reshape(-1)
        seed_offsets = np.arange(nq + 1, dtype=np.int64) * arr.shape[1]
    else:
        prepped = [_prep_seeds(g, seeds) for seeds in seed_sets]
        nq = len(prepped)
        if nq == 0:
            return []
        seeds_flat = np.concatenate(prepped)
        seed_offsets = np.zeros(nq + 1, dtype=np.int64)
        seed_offsets[1:] = np.cumsum([p.shape[0] for p in prepped])
    scratch = scratch or ScratchSpace(g.node_count)
    stamp = scratch.vector("stamp")
    depth = scratch.vector("depth")
    order = scratch.vector("order")
    out_offsets = np.zeros(nq + 1, dtype=np.int64)
    out_nodes = scratch.work_buffer(
        "bfs_nodes", max(1024, 4 * seeds_flat.shape[0])
    )
    cap = _UNBOUNDED if fanout_cap is None else fanout_cap
    budget = _UNBOUNDED if max_nodes is None else max_nodes
    start = 0
    while start < nq:
        epoch_base = scratch.reserve_epochs(nq - start)
        done = _kernels.bfs_batch_nodes_driver(
            g.offsets,
            g.neighbors,
            stamp,
            depth,
            order,
            epoch_base,
            seeds_flat,
            seed_offsets,
            hops,
            cap,
            budget,
            out_nodes,
            out_offsets,
            start,
        )
        if done < nq:
            written = int(out_offsets[done])
            out_nodes = scratch.work_buffer(
                "bfs_nodes",
                max(2 * out_nodes.shape[0], written + g.node_count),
                preserve=written,
            )
        start = done
    total = int(out_offsets[nq])
    result = out_nodes[:total].copy()
    return [result[out_offsets[i] : out_offsets[i + 1]] for i in range(nq)]


# ---------------------------------------------------------------------------
# Multi-source shortest paths
# ---------------------------------------------------------------------------


def multi_source_distances(g: Graph, sources: Iterable[int]) -> DistanceResult:
    """Shortest-path distance from the nearest source to every node.

    Dijkstra semantics with a level-BFS fast path when all edge weights are
    equal; both resolve ties by ascending node id, so results are identical
    across runs.
    """
    src = _prep_seeds(g, sources)
    n = g.node_count
    dist = np.full(n, np.inf, dtype=np.float64)
    nearest = np.full(n, -1, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    w0 = g.uniform_weight
    if w0 is not None:
        level = src.tolist()
        for s in level:
            dist[s] = 0.0
            nearest[s] = s
        d = 0
        while level:
            nxt = []
            for u in level:
                for j in range(g.offsets[u], g.offsets[u + 1]):
                    v = int(g.neighbors[j])
                    if nearest[v] == -1:
                        nearest[v] = nearest[u]
                        parent[v] = u
                        dist[v] = d + 1
                        nxt.append(v)
            nxt.sort()
            level = nxt
            d += 1
        dist *= w0
        return DistanceResult(distances=dist, nearest_source=nearest, parents=parent)
    heap = [(0.0, int(s)) for s in src]
    for s in src:
        dist[s] = 0.0
        nearest[s] = s
    done = np.zeros(n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for j in range(g.offsets[u], g.offsets[u + 1]):
            v = int(g.neighbors[j])
            nd = d + g.weight_of_arc(j)
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                nearest[v] = nearest[u]
                heapq.heappush(heap, (nd, v))
    return DistanceResult(distances=dist, nearest_source=nearest, parents=parent)


# ---------------------------------------------------------------------------
# Steiner trees
# ---------------------------------------------------------------------------


def _prim_closure(dist_fn, t: int) -> list:
    """Prim MST over a complete closure of ``t`` terminals.

    ``dist_fn(i, j)`` returns the closure weight; ties go to earlier entry
    and lower index. Returns edges as (i, j) index pairs.
    """
    in_tree = [False] * t
    best_w = [dist_fn(0, j) for j in range(t)]
    best_from = [0] * t
    in_tree[0] = True
    edges = []
    for _ in range(t - 1):
        pick = -1
        for j in range(t):
            if not in_tree[j] and (pick == -1 or best_w[j] < best_w[pick]):
                pick = j
        edges.append((best_from[pick], pick))
        in_tree[pick] = True
        for j in range(t):
            if not in_tree[j]:
                w = dist_fn(pick, j)
                if w < best_w[j]:
                    best_w[j] = w
                    best_from[j] = pick
    return edges


def _kruskal(edge_items: list) -> list:
    """MST via Kruskal over (u, v, w) items sorted by (w, u, v)."""
    parent: dict = {}

    def find(x):
        root = x
        while parent.get(root, root) != root:
            root = parent[root]
        while parent.get(x, x) != x:
            parent[x], x = root, parent[x]
        return root

    kept = []
    for u, v, w in sorted(edge_items, key=lambda e: (e[2], e[0], e[1])):
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            kept.append((u, v, w))
    return kept


def _prune_leaves(edge_items: list, terminal_set: set) -> list:
    """Iteratively drop non-terminal leaves; returns the surviving edges."""
    adj: dict = {}
    for u, v, w in edge_items:
        adj.setdefault(u, {})[v] = w
        adj.setdefault(v, {})[u] = w
    queue = sorted(u for u in adj if len(adj[u]) == 1 and u not in terminal_set)
    while queue:
        u = queue.pop()
        if u not in adj or len(adj[u]) != 1:
            continue
        (v,) = adj[u].keys()
        del adj[u]
        del adj[v][u]
        if len(adj[v]) == 1 and v not in terminal_set:
            queue.append(v)
    return [(u, v, w) for u, v, w in edge_items if u in adj and v in adj[u]]


def _single_node_subgraph(g: Graph, node: int, method: str, seed_scores) -> Subgraph:
    score = 1.0
    if seed_scores is not None and seed_scores.get(node) is not None:
        score = float(seed_scores[node])
    empty = np.empty(0, dtype=np.int64)
    return Subgraph(
        parent=g,
        nodes=np.array([node], dtype=np.int64),
        edge_src=empty,
        edge_dst=empty,
        edge_weight=None if g.weights is None else np.empty(0, dtype=np.float64),
        provenance=Provenance(
            seeds=(node,), method=method, scores=np.array([score])
        ),
    )


def _assemble_steiner(g, terminals, tree_edges, seed_scores) -> Subgraph:
    term_arr = np.asarray(sorted(set(terminals)), dtype=np.int64)
    if tree_edges:
        pairs = np.asarray([(u, v) for u, v, _ in tree_edges], dtype=np.int64)
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        order = np.lexsort((hi, lo))
        eu, ev = lo[order], hi[order]
        nodes = np.unique(np.concatenate([pairs.reshape(-1), term_arr]))
        ew = None
        if g.weights is not None:
            ew = np.asarray([w for _, _, w in tree_edges], dtype=np.float64)[order]
    else:
        nodes = term_arr
        eu = ev = np.empty(0, dtype=np.int64)
        ew = None if g.weights is None else np.empty(0, dtype=np.float64)
    scores = np.full(nodes.shape[0], _NONSEED_STEINER_SCORE, dtype=np.float64)
    scores[np.searchsorted(nodes, term_arr)] = 1.0
    _apply_seed_scores(nodes, scores, term_arr, seed_scores)
    return Subgraph(
        parent=g,
        nodes=nodes,
        edge_src=eu,
        edge_dst=ev,
        edge_weight=ew,
        provenance=Provenance(
            seeds=tuple(term_arr.tolist()), method="steiner", scores=scores
        ),
    )


def _steiner_uniform_kernel_route(g, term_arr, scratch, seed_scores):
    # pass i only needs distances to later terminals (the closure is
    # symmetric), so it stops earlier and the last terminal needs no pass
    t = term_arr.shape[0]
    stamp2d = scratch.matrix("steiner_stamp", t - 1)
    dist2d = scratch.matrix("steiner_dist", t - 1)
    parent2d = scratch.matrix("steiner_parent", t - 1)
    order = scratch.vector("order")
    for i in range(t - 1):
        epoch = scratch.next_epoch()
        remaining = _kernels.bfs_sssp_until_kernel(
            g.offsets,
            g.neighbors,
            stamp2d[i],
            dist2d[i],
            parent2d[i],
            order,
            epoch,
            int(term_arr[i]),
            term_arr[i + 1 :],
        )
        if remaining:
            for x in term_arr[i + 1 :]:
                if stamp2d[i][x] != epoch:
                    raise ValueError(
                        f"terminals {int(term_arr[i])} and {int(x)} lie in "
                        "different connected components"
                    )
    w0 = g.uniform_weight

    def closure(i, j):
        a, b = (i, j) if i < j else (j, i)
        return int(dist2d[a][term_arr[b]])

    mst = _prim_closure(closure, t)
    union: dict = {}
    for i, j in mst:
        a, b = (i, j) if i < j else (j, i)
        x = int(term_arr[b])
        src = int(term_arr[a])
        while x != src:
            p = int(parent2d[a][x])
            union[(min(p, x), max(p, x))] = w0
            x = p
    union_items = [(u, v, w) for (u, v), w in union.items()]
    tree = _kruskal(union_items)
    tree = _prune_leaves(tree, set(int(x) for x in term_arr))
    return _assemble_steiner(g, [int(x) for x in term_arr], tree, seed_scores)


def _dijkstra_until(g: Graph, source: int, targets: set):
    """Early-stopping heap Dijkstra; returns (dist, parent) dicts over the
    settled ball. Raises nothing; caller checks for missing targets."""
    dist = {source: 0.0}
    parent = {source: -1}
    settled = set()
    want = set(targets) - {source}
    heap = [(0.0, source)]
    while heap and want:
        d, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        want.discard(u)
        if not want:
            break
        for j in range(g.offsets[u], g.offsets[u + 1]):
            v = int(g.neighbors[j])
            nd = d + g.weight_of_arc(j)
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, parent, want


def _steiner_python_route(g, term_arr, seed_scores, uniform: bool):
    terminals = [int(x) for x in term_arr]
    dists = []
    parents = []
    for i, s in enumerate(terminals[:-1]):
        later = set(terminals[i + 1 :])
        if uniform:
            dist, parent = _uniform_ball(g, s, later)
            missing = later - set(dist)
        else:
            dist, parent, missing = _dijkstra_until(g, s, later)
        if missing:
            x = min(missing)
            raise ValueError(
                f"terminals {s} and {x} lie in different connected components"
            )
        dists.append(dist)
        parents.append(parent)

    def closure(i, j):
        a, b = (i, j) if i < j else (j, i)
        return dists[a][terminals[b]]

    mst = _prim_closure(closure, len(terminals))
    union: dict = {}
    for i, j in mst:
        a, b = (i, j) if i < j else (j, i)
        x = terminals[b]
        src = terminals[a]
        while x != src:
            p = parents[a][x]
            key = (min(p, x), max(p, x))
            union[key] = g.edge_weight(key[0], key[1])
            x = p
    union_items = [(u, v, w) for (u, v), w in union.items()]
    tree = _kruskal(union_items)
    tree = _prune_leaves(tree, set(terminals))
    return _assemble_steiner(g, terminals, tree, seed_scores)


def _uniform_ball(g: Graph, source: int, targets: set):
    """Admission-order BFS ball from ``source`` until targets settle.

    Claim order matches ``bfs_sssp_until_kernel`` exactly; distances are in
    weight units (levels times the uniform weight).
    """
    w0 = g.uniform_weight
    dist = {source: 0.0}
    parent = {source: -1}
    queue = [source]
    want = set(targets) - {source}
    head = 0
    while head < len(queue) and want:
        u = queue[head]
        head += 1
        du = dist[u]
        for j in range(g.offsets[u], g.offsets[u + 1]):
            v = int(g.neighbors[j])
            if v not in dist:
                dist[v] = du + w0
                parent[v] = u
                queue.append(v)
                want.discard(v)
                if not want:
                    return dist, parent
    return dist, parent


def _steiner_batch_uniform(g: Graph, term_arrs, scratch: ScratchSpace, seed_scores_list):
    """Run the compiled KMB driver over many prepped terminal arrays.

    Every array must be sorted, unique, in range, and of length 2..16; the
    caller handles single terminals and oversized sets. Returns one Subgraph
    or FailedQuery-compatible error string per query, in order.
    """
    nq = len(term_arrs)
    tmax = max(arr.shape[0] for arr in term_arrs)
    stamp2d = scratch.matrix("steiner_stamp", tmax - 1)
    dist2d = scratch.matrix("steiner_dist", tmax - 1)
    parent2d = scratch.matrix("steiner_parent", tmax - 1)
    order = scratch.vector("order")
    terms_flat = np.concatenate(term_arrs)
    term_offsets = np.zeros(nq + 1, dtype=np.int64)
    term_offsets[1:] = np.cumsum([a.shape[0] for a in term_arrs])
    out_offsets = np.zeros(nq + 1, dtype=np.int64)
    out_eu = scratch.work_buffer("steiner_eu", max(1024, 4 * int(terms_flat.shape[0])))
    out_ev = scratch.work_buffer("steiner_ev", out_eu.shape[0])
    status = np.zeros(nq, dtype=np.int64)
    bad_src = np.full(nq, -1, dtype=np.int64)
    bad_dst = np.full(nq, -1, dtype=np.int64)
    start = 0
    while start < nq:
        done, used = _kernels.steiner_batch_driver(
            g.offsets,
            g.neighbors,
            stamp2d,
            dist2d,
            parent2d,
            order,
            scratch.epoch,
            terms_flat,
            term_offsets,
            start,
            out_eu,
            out_ev,
            out_offsets,
            status,
            bad_src,
            bad_dst,
        )
        scratch.epoch += int(used)
        if done < nq:
            written = int(out_offsets[done])
            out_eu = scratch.work_buffer(
                "steiner_eu", max(2 * out_eu.shape[0], written + g.node_count), preserve=written
            )
            out_ev = scratch.work_buffer(
                "steiner_ev", out_eu.shape[0], preserve=written
            )
        start = done
    w0 = g.uniform_weight
    results = []
    for i, term_arr in enumerate(term_arrs):
        if status[i] == 1:
            results.append(
                ValueError(
                    f"terminals {int(bad_src[i])} and {int(bad_dst[i])} lie in "
                    "different connected components"
                )
            )
            continue
        scores = seed_scores_list[i] if seed_scores_list is not None else None
        if status[i] == 2:
            # pathological path length: fall back to the reference route
            results.append(_steiner_python_route(g, term_arr, scores, uniform=True))
            continue
        lo, hi = int(out_offsets[i]), int(out_offsets[i + 1])
        # driver emits edges already canonical and ascending by (u, v)
        eu = out_eu[lo:hi].copy()
        ev = out_ev[lo:hi].copy()
        nodes = np.unique(np.concatenate([eu, ev, term_arr]))
        node_scores = np.full(nodes.shape[0], _NONSEED_STEINER_SCORE)
        node_scores[np.searchsorted(nodes, term_arr)] = 1.0
        _apply_seed_scores(nodes, node_scores, term_arr, scores)
        results.append(
            Subgraph(
                parent=g,
                nodes=nodes,
                edge_src=eu,
                edge_dst=ev,
                edge_weight=None if g.weights is None else np.full(eu.shape[0], w0),
                provenance=Provenance(
                    seeds=tuple(term_arr.tolist()), method="steiner", scores=node_scores
                ),
            )
        )
    return results


def steiner_subgraph(
    g: Graph,
    terminals: Iterable[int],
    seed_scores: Optional[dict] = None,
    scratch: Optional[ScratchSpace] = None,
) -> Subgraph:
    """Approximate minimum Steiner tree spanning ``terminals``.

    Metric-closure 2-approximation: shortest-path closure over terminals,
    MST of the closure, expansion of MST edges to real paths, MST of the
    union, and iterative pruning of non-terminal leaves. The result is a
    tree containing every terminal with weight at most twice the optimum.
    Terminals spanning different components raise, naming an offending pair.
    """
    if g.directed:
        raise ValueError("steiner_subgraph requires an undirected graph")
    term_arr = _prep_seeds(g, terminals)
    if term_arr.shape[0] == 1:
        return _single_node_subgraph(g, int(term_arr[0]), "steiner", seed_scores)
    uniform = g.uniform_weight is not None
    if uniform and term_arr.shape[0] <= _STEINER_MATRIX_MAX_TERMINALS:
        scratch = scratch or ScratchSpace(g.node_count)
        return _steiner_uniform_kernel_route(g, term_arr, scratch, seed_scores)
    return _steiner_python_route(g, term_arr, seed_scores, uniform)


# ---------------------------------------------------------------------------
# Dense subgraphs
# ---------------------------------------------------------------------------


def dense_subgraph(
    g: Graph,
    seeds: Iterable[int],
    pool_hops: int,
    max_nodes: Optional[int] = None,
    pool_cap: Optional[int] = None,
    seed_scores: Optional[dict] = None,
    scratch: Optional[ScratchSpace] = None,
) -> Subgraph:
    """Densest seed-containing subgraph by greedy peeling.

    A BFS pool of radius ``pool_hops`` around the seeds is peeled one
    minimum-degree non-seed at a time (ties to the lowest id); the densest
    prefix wins, with later prefixes preferred on equal density. Seeds are
    never peeled. ``pool_cap`` bounds the candidate pool (default: eight
    times ``max_nodes`` when that is set, else unbounded); the final answer
    is truncated to ``max_nodes`` by dropping lowest-degree non-seeds.
    """
    seed_arr = _prep_seeds(g, seeds)
    if pool_hops < 0:
        raise ValueError("pool_hops must be >= 0")
    if pool_cap is None and max_nodes is not None:
        pool_cap = max(256, 8 * max_nodes)
    pool = bfs_expand(
        g, seed_arr, hops=pool_hops, fanout_cap=None, max_nodes=pool_cap, scratch=scratch
    )
    nodes = pool.nodes
    local = {int(u): i for i, u in enumerate(nodes)}
    m = nodes.shape[0]
    deg = np.zeros(m, dtype=np.int64)
    adj: list = [[] for _ in range(m)]
    for u, v in zip(pool.edge_src.tolist(), pool.edge_dst.tolist()):
        iu, iv = local[u], local[v]
        adj[iu].append(iv)
        adj[iv].append(iu)
        deg[iu] += 1
        deg[iv] += 1
    is_seed = np.isin(nodes, seed_arr)
    alive = np.ones(m, dtype=bool)
    edges_alive = pool.edge_count
    nodes_alive = m
    best_density = edges_alive / nodes_alive
    best_step = 0
    removal: list = []
    heap = [(int(deg[i]), int(nodes[i]), i) for i in range(m) if not is_seed[i]]
    heapq.heapify(heap)
    while heap:
        d, _, i = heapq.heappop(heap)
        if not alive[i] or d != deg[i]:
            continue
        alive[i] = False
        removal.append(i)
        edges_alive -= int(deg[i])
        nodes_alive -= 1
        for j in adj[i]:
            if alive[j]:
                deg[j] -= 1
                if not is_seed[j]:
                    heapq.heappush(heap, (int(deg[j]), int(nodes[j]), j))
        if nodes_alive > 0:
            density = edges_alive / nodes_alive
            if density >= best_density:
                best_density = density
                best_step = len(removal)
    keep = np.ones(m, dtype=bool)
    for i in removal[:best_step]:
        keep[i] = False

    if max_nodes is not None and int(keep.sum()) > max_nodes:
        deg2 = np.zeros(m, dtype=np.int64)
        for i in range(m):
            if keep[i]:
                deg2[i] = sum(1 for j in adj[i] if keep[j])
        heap2 = [
            (int(deg2[i]), int(nodes[i]), i)
            for i in range(m)
            if keep[i] and not is_seed[i]
        ]
        heapq.heapify(heap2)
        remaining = int(keep.sum())
        while remaining > max_nodes and heap2:
            d, _, i = heapq.heappop(heap2)
            if not keep[i] or d != deg2[i]:
                continue
            keep[i] = False
            remaining -= 1
            for j in adj[i]:
                if keep[j]:
                    deg2[j] -= 1
                    if not is_seed[j]:
                        heapq.heappush(heap2, (int(deg2[j]), int(nodes[j]), j))

    final_nodes = nodes[keep]
    eu, ev, ew = _induced_edges(g, final_nodes)
    final_deg = np.zeros(final_nodes.shape[0], dtype=np.int64)
    if eu.size:
        np.add.at(final_deg, np.searchsorted(final_nodes, eu), 1)
        np.add.at(final_deg, np.searchsorted(final_nodes, ev), 1)
    top = max(1, int(final_deg.max()) if final_deg.size else 1)
    scores = final_deg.astype(np.float64) / top
    scores[np.isin(final_nodes, seed_arr)] = 1.0
    _apply_seed_scores(final_nodes, scores, seed_arr, seed_scores)
    return Subgraph(
        parent=g,
        nodes=final_nodes,
        edge_src=eu,
        edge_dst=ev,
        edge_weight=ew,
        provenance=Provenance(
            seeds=tuple(int(s) for s in seed_arr), method="dense", scores=scores
        ),
    )


# ---------------------------------------------------------------------------
# Filtering and PageRank
# ---------------------------------------------------------------------------


def filter_nodes(candidates: Sequence[RetrievalHit], flt: NodeFilter) -> list:
    """Trim a score-descending candidate list; order is preserved."""
    if flt.kind == "none":
        return list(candidates)
    if flt.kind == "top_k":
        return list(candidates[: flt.k])
    return [h for h in candidates if h.score >= flt.threshold]


def transition_matrix(g: Graph):
    """Row-stochastic out-neighbor transition (transposed CSR) plus the
    dangling-row mask. Weights are ignored: each out-neighbor is equally
    likely, matching the structural random-walk baseline."""
    outdeg = np.diff(g.offsets)
    inv = np.zeros(g.node_count, dtype=np.float64)
    nz = outdeg > 0
    inv[nz] = 1.0 / outdeg[nz]
    data = np.repeat(inv, outdeg)
    mat = sp.csr_matrix(
        (data, g.neighbors, g.offsets), shape=(g.node_count, g.node_count)
    )
    return mat.T.tocsr(), ~nz


def ppr_scores(
    g: Graph,
    seeds: Iterable[int],
    alpha: float = 0.15,
    iters: int = 50,
    _transition=None,
) -> np.ndarray:
    """Personalized PageRank by power iteration.

    Restart vector is uniform over the seeds; dangling mass is redirected to
    the restart vector, so scores stay a probability distribution.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    seed_arr = _prep_seeds(g, seeds)
    pt, dangling = _transition if _transition is not None else transition_matrix(g)
    r = np.zeros(g.node_count, dtype=np.float64)
    r[seed_arr] = 1.0 / seed_arr.shape[0]
    p = r.copy()
    for _ in range(iters):
        q = pt @ p
        lost = float(p[dangling].sum())
        if lost:
            q = q + lost * r
        p = alpha * r + (1.0 - alpha) * q
    return p


# ---------------------------------------------------------------------------
# Batch driver
# ---------------------------------------------------------------------------


def _dispatch_query(g, seeds, cfg: RetrievalConfig, seed_scores, scratch):
    if cfg.method == "bfs":
        return bfs_expand(
            g,
            seeds,
            hops=cfg.hops,
            fanout_cap=cfg.fanout_cap,
            max_nodes=cfg.max_nodes,
            seed_scores=seed_scores,
            scratch=scratch,
        )
    if cfg.method == "steiner":
        return steiner_subgraph(g, seeds, seed_scores=seed_scores, scratch=scratch)
    return dense_subgraph(
        g,
        seeds,
        pool_hops=cfg.hops,
        max_nodes=cfg.max_nodes,
        seed_scores=seed_scores,
        scratch=scratch,
    )


def batch_retrieve(
    g: Graph,
    seed_sets: Sequence[Iterable[int]],
    cfg: RetrievalConfig,
    seed_scores: Optional[Sequence[Optional[dict]]] = None,
    workers: int = 1,
    scratch: Optional[ScratchSpace] = None,
) -> list:
    """Run one retrieval per seed set; results keep input order.

    Each result is the same Subgraph the single-query operation returns; a
    failing query yields a FailedQuery in its slot instead of aborting the
    batch. Scratch buffers are reused across a worker's queries via epoch
    stamping, and each worker owns a private ScratchSpace, so output is
    independent of ``workers``.
    """
    seed_sets = list(seed_sets)
    if seed_scores is not None and len(seed_scores) != len(seed_sets):
        raise ValueError("seed_scores must align with seed_sets")
    m = len(seed_sets)
    if m == 0:
        return []
    results: list = [None] * m

    def run_steiner_chunk(indices, scr):
        batch_idx, term_arrs, scores_list = [], [], []
        for i in indices:
            ss = seed_scores[i] if seed_scores is not None else None
            try:
                arr = _prep_seeds(g, seed_sets[i])
            except ValueError as exc:
                results[i] = FailedQuery(index=i, error=str(exc))
                continue
            if arr.shape[0] == 1:
                results[i] = _single_node_subgraph(g, int(arr[0]), "steiner", ss)
            elif arr.shape[0] > _STEINER_MATRIX_MAX_TERMINALS:
                try:
                    results[i] = _steiner_python_route(g, arr, ss, uniform=True)
                except ValueError as exc:
                    results[i] = FailedQuery(index=i, error=str(exc))
            else:
                batch_idx.append(i)
                term_arrs.append(arr)
                scores_list.append(ss)
        if batch_idx:
            outs = _steiner_batch_uniform(g, term_arrs, scr, scores_list)
            for i, out in zip(batch_idx, outs):
                if isinstance(out, ValueError):
                    results[i] = FailedQuery(index=i, error=str(out))
                else:
                    results[i] = out

    def run(indices, scr):
        if (
            cfg.method == "steiner"
            and g.uniform_weight is not None
            and not g.directed
        ):
            run_steiner_chunk(list(indices), scr)
            return
        for i in indices:
            ss = seed_scores[i] if seed_scores is not None else None
            try:
                results[i] = _dispatch_query(g, seed_sets[i], cfg, ss, scr)
            except (ValueError, KeyError) as exc:
                results[i] = FailedQuery(index=i, error=str(exc))

    if workers <= 1 or m == 1:
        run(range(m), scratch or ScratchSpace(g.node_count))
        return results
    chunks = np.array_split(np.arange(m), min(workers, m))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(run, chunk.tolist(), ScratchSpace(g.node_count))
            for chunk in chunks
            if chunk.size
        ]
        for f in futures:
            f.result()
    return results
