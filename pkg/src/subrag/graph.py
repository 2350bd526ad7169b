"""Immutable CSR graph container: construction, validation, and subgraph extraction.

Node ids are dense integers ``0..node_count-1``. Undirected graphs are stored
symmetrically (both arc directions present with equal weight). Unweighted
graphs behave as if every edge had weight 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "Graph",
    "NodeAttributes",
    "Provenance",
    "Subgraph",
    "build_graph",
    "neighbors",
    "induced_subgraph",
    "validate",
]


@dataclass(frozen=True)
class Graph:
    """Compressed-sparse-row adjacency.

    ``offsets`` has length ``node_count + 1``; the sorted adjacency list of
    node ``u`` is ``neighbors[offsets[u]:offsets[u+1]]`` and, when the graph
    is weighted, ``weights`` is aligned with ``neighbors``.
    """

    node_count: int
    offsets: np.ndarray
    neighbors: np.ndarray
    weights: Optional[np.ndarray]
    directed: bool

    def __post_init__(self):
        for arr in (self.offsets, self.neighbors, self.weights):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def arc_count(self) -> int:
        """Number of stored arcs (each undirected edge counts twice)."""
        return int(self.neighbors.shape[0])

    @property
    def edge_count(self) -> int:
        """Number of edges; undirected edges counted once."""
        return self.arc_count if self.directed else self.arc_count // 2

    def degree(self, u: int) -> int:
        return int(self.offsets[u + 1] - self.offsets[u])

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    @cached_property
    def uniform_weight(self) -> Optional[float]:
        """The shared edge weight if all weights are equal (1.0 when
        unweighted), else None. Lets shortest-path code pick a BFS fast path.
        """
        if self.weights is None:
            return 1.0
        if self.weights.size == 0:
            return 1.0
        w0 = float(self.weights[0])
        return w0 if bool(np.all(self.weights == w0)) else None

    def weight_of_arc(self, pos: int) -> float:
        return 1.0 if self.weights is None else float(self.weights[pos])

    def has_edge(self, u: int, v: int) -> bool:
        s, e = self.offsets[u], self.offsets[u + 1]
        pos = np.searchsorted(self.neighbors[s:e], v)
        return pos < (e - s) and self.neighbors[s + pos] == v

    def edge_weight(self, u: int, v: int) -> float:
        """Weight of edge (u, v); raises KeyError when absent."""
        s, e = self.offsets[u], self.offsets[u + 1]
        pos = int(np.searchsorted(self.neighbors[s:e], v))
        if pos >= e - s or self.neighbors[s + pos] != v:
            raise KeyError(f"no edge ({u}, {v})")
        return 1.0 if self.weights is None else float(self.weights[s + pos])


@dataclass(frozen=True)
class NodeAttributes:
    """Optional per-node payloads, each aligned with ``node_count``.

    ``texts`` holds None for nodes without text; ``features`` is a dense
    (node_count, d) float matrix; ``labels`` uses -1 for missing entries.
    """

    node_count: int
    texts: Optional[list] = None
    features: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.texts is not None and len(self.texts) != self.node_count:
            raise ValueError(
                f"texts has length {len(self.texts)}, expected {self.node_count}"
            )
        if self.features is not None:
            if self.features.ndim != 2 or self.features.shape[0] != self.node_count:
                raise ValueError(
                    f"features has shape {self.features.shape}, expected "
                    f"({self.node_count}, d)"
                )
            self.features.setflags(write=False)
        if self.labels is not None:
            if self.labels.shape != (self.node_count,):
                raise ValueError(
                    f"labels has shape {self.labels.shape}, expected "
                    f"({self.node_count},)"
                )
            self.labels.setflags(write=False)

    @property
    def feature_dim(self) -> Optional[int]:
        return None if self.features is None else int(self.features.shape[1])


@dataclass(frozen=True)
class Provenance:
    """How a subgraph was obtained: seed nodes, construction method, and a
    relevance score per subgraph node (aligned with ``Subgraph.nodes``)."""

    seeds: tuple
    method: str
    scores: np.ndarray

    def __post_init__(self):
        self.scores.setflags(write=False)

    def score_of(self, node: int, nodes: np.ndarray) -> float:
        pos = int(np.searchsorted(nodes, node))
        return float(self.scores[pos])


@dataclass(frozen=True)
class Subgraph:
    """A node/edge subset of a parent graph.

    ``nodes`` is sorted and unique. Edges are stored as parallel arrays; for
    undirected parents each edge appears once with ``edge_src < edge_dst``.
    """

    parent: Graph
    nodes: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_weight: Optional[np.ndarray]
    provenance: Provenance

    def __post_init__(self):
        for arr in (self.nodes, self.edge_src, self.edge_dst, self.edge_weight):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def node_count(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.edge_src.shape[0])

    @property
    def edges(self) -> list:
        """Edge list view as (u, v) or (u, v, w) tuples."""
        if self.edge_weight is None:
            return list(zip(self.edge_src.tolist(), self.edge_dst.tolist()))
        return list(
            zip(
                self.edge_src.tolist(),
                self.edge_dst.tolist(),
                self.edge_weight.tolist(),
            )
        )

    @property
    def density(self) -> float:
        """Edge/node ratio; 0.0 for the empty subgraph."""
        return self.edge_count / self.node_count if self.node_count else 0.0

    def total_weight(self) -> float:
        if self.edge_weight is None:
            return float(self.edge_count)
        return float(self.edge_weight.sum())


def _check_node(u: int, node_count: int, what: str = "node") -> None:
    if not 0 <= u < node_count:
        raise ValueError(f"{what} {u} out of range [0, {node_count})")


def build_graph(
    edge_list: Iterable[Sequence],
    node_count: int,
    directed: bool = False,
) -> Graph:
    """Build a validated CSR graph from an edge list.

    Each entry is ``(u, v)`` or ``(u, v, w)``. Duplicate edges collapse to the
    first occurrence's weight; for undirected graphs ``(u, v)`` and ``(v, u)``
    are the same edge. Self-loops and negative weights are rejected.
    """
    edge_list = list(edge_list)
    if node_count < 0:
        raise ValueError("node_count must be >= 0")
    if node_count == 0 and edge_list:
        raise ValueError("node_count is 0 but edge list is nonempty")

    weighted = any(len(e) >= 3 for e in edge_list)
    seen: dict = {}
    for e in edge_list:
        u, v = int(e[0]), int(e[1])
        _check_node(u, node_count, "edge endpoint")
        _check_node(v, node_count, "edge endpoint")
        if u == v:
            raise ValueError(f"self-loop ({u}, {u}) not allowed")
        w = float(e[2]) if len(e) >= 3 else 1.0
        if w < 0:
            raise ValueError(f"negative weight {w} on edge ({u}, {v})")
        key = (u, v) if directed else (min(u, v), max(u, v))
        if key not in seen:
            seen[key] = w

    if not seen:
        offsets = np.zeros(node_count + 1, dtype=np.int64)
        return Graph(
            node_count=node_count,
            offsets=offsets,
            neighbors=np.empty(0, dtype=np.int64),
            weights=np.empty(0, dtype=np.float64) if weighted else None,
            directed=directed,
        )

    keys = np.array(list(seen.keys()), dtype=np.int64)
    vals = np.array(list(seen.values()), dtype=np.float64)
    src, dst = keys[:, 0], keys[:, 1]
    if not directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        vals = np.concatenate([vals, vals])

    order = np.lexsort((dst, src))
    src, dst, vals = src[order], dst[order], vals[order]
    offsets = np.zeros(node_count + 1, dtype=np.int64)
    np.add.at(offsets, src + 1, 1)
    offsets = np.cumsum(offsets)
    return Graph(
        node_count=node_count,
        offsets=offsets,
        neighbors=dst,
        weights=vals if weighted else None,
        directed=directed,
    )


def neighbors(g: Graph, u: int) -> np.ndarray:
    """Sorted adjacency slice of ``u`` (O(1) lookup, read-only view)."""
    _check_node(u, g.node_count)
    return g.neighbors[g.offsets[u] : g.offsets[u + 1]]


def induced_subgraph(g: Graph, nodes: Iterable[int]) -> Subgraph:
    """Subgraph on ``nodes`` with exactly the parent edges between them."""
    node_arr = np.unique(np.asarray(list(nodes), dtype=np.int64))
    if node_arr.size:
        _check_node(int(node_arr[0]), g.node_count)
        _check_node(int(node_arr[-1]), g.node_count)
    eu, ev, ew = _induced_edges(g, node_arr)
    return Subgraph(
        parent=g,
        nodes=node_arr,
        edge_src=eu,
        edge_dst=ev,
        edge_weight=ew,
        provenance=Provenance(
            seeds=(),
            method="induced",
            scores=np.ones(node_arr.shape[0], dtype=np.float64),
        ),
    )


def _induced_edges(g: Graph, node_arr: np.ndarray):
    """Edges of g with both endpoints in the sorted id array ``node_arr``."""
    if node_arr.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, (None if g.weights is None else np.empty(0))
    starts = g.offsets[node_arr]
    counts = g.offsets[node_arr + 1] - starts
    total = int(counts.sum())
    if total == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, (None if g.weights is None else np.empty(0))
    idx = np.repeat(starts, counts) + (
        np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    )
    eu = np.repeat(node_arr, counts)
    ev = g.neighbors[idx]
    pos = np.searchsorted(node_arr, ev)
    pos = np.minimum(pos, node_arr.size - 1)
    keep = node_arr[pos] == ev
    if not g.directed:
        keep &= eu < ev
    eu, ev = eu[keep], ev[keep]
    ew = None if g.weights is None else g.weights[idx[keep]]
    return eu, ev, ew


def validate(g: Graph) -> None:
    """Check every CSR invariant; raises ValueError on the first violation."""
    if g.offsets.shape != (g.node_count + 1,):
        raise ValueError("offsets length must be node_count + 1")
    if g.offsets[0] != 0:
        raise ValueError("offsets[0] must be 0")
    if np.any(np.diff(g.offsets) < 0):
        raise ValueError("offsets must be non-decreasing")
    if g.offsets[-1] != g.neighbors.shape[0]:
        raise ValueError("offsets[-1] must equal len(neighbors)")
    if g.neighbors.size:
        if g.neighbors.min() < 0 or g.neighbors.max() >= g.node_count:
            raise ValueError("neighbor id out of range")
    if g.weights is not None:
        if g.weights.shape != g.neighbors.shape:
            raise ValueError("weights must align with neighbors")
        if g.weights.size and g.weights.min() < 0:
            raise ValueError("negative edge weight")
    for u in range(g.node_count):
        adj = g.neighbors[g.offsets[u] : g.offsets[u + 1]]
        if adj.size:
            if np.any(np.diff(adj) <= 0):
                raise ValueError(f"adjacency of {u} not sorted strictly ascending")
            if np.any(adj == u):
                raise ValueError(f"self-loop at {u}")
    if not g.directed:
        for u in range(g.node_count):
            s, e = g.offsets[u], g.offsets[u + 1]
            for pos in range(s, e):
                v = int(g.neighbors[pos])
                try:
                    w_back = g.edge_weight(v, u)
                except KeyError:
                    raise ValueError(f"missing reverse arc for ({u}, {v})")
                if g.weights is not None and w_back != float(g.weights[pos]):
                    raise ValueError(f"asymmetric weight on edge ({u}, {v})")


def validate_subgraph(sub: Subgraph) -> None:
    """Check Subgraph invariants against its parent graph."""
    g = sub.parent
    if sub.nodes.size:
        if np.any(np.diff(sub.nodes) <= 0):
            raise ValueError("subgraph nodes not sorted unique")
        if sub.nodes[0] < 0 or sub.nodes[-1] >= g.node_count:
            raise ValueError("subgraph node out of parent range")
    node_set = set(sub.nodes.tolist())
    for s in sub.provenance.seeds:
        if s not in node_set:
            raise ValueError(f"seed {s} missing from subgraph nodes")
    if sub.provenance.scores.shape != sub.nodes.shape:
        raise ValueError("provenance scores must align with nodes")
    for i in range(sub.edge_count):
        u, v = int(sub.edge_src[i]), int(sub.edge_dst[i])
        if u not in node_set or v not in node_set:
            raise ValueError(f"edge ({u}, {v}) endpoint outside subgraph")
        if not g.has_edge(u, v):
            raise ValueError(f"edge ({u}, {v}) not present in parent graph")
        if sub.edge_weight is not None:
            if float(sub.edge_weight[i]) != g.edge_weight(u, v):
                raise ValueError(f"edge ({u}, {v}) weight differs from parent")
