"""Retrieval benchmark harness.

Times the optimized batched kernels against in-repo naive references built the
way classic Python graph libraries are: hash-map adjacency, fresh containers
per call, one query at a time. Both sides implement the identical algorithms
and tie-breaks (see ``retrieval``), so the benchmark measures machinery, not
different answers.
"""

from __future__ import annotations

import csv
import gc
import logging
import time
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import Graph, Subgraph, build_graph
from .retrieval import (
    RetrievalConfig,
    ScratchSpace,
    _assemble_steiner,
    _kruskal,
    _prim_closure,
    _prune_leaves,
    _single_node_subgraph,
    batch_bfs_nodes,
    batch_retrieve,
    bfs_expand,
)

logger = logging.getLogger(__name__)

__all__ = [
    "SyntheticGraphSpec",
    "BenchConfig",
    "BenchRecord",
    "NaiveGraph",
    "gen_graph",
    "is_connected",
    "naive_bfs",
    "naive_steiner",
    "run_bench",
    "write_bench_csv",
]

CSV_COLUMNS = [
    "graph",
    "method",
    "impl",
    "queries",
    "repetition",
    "retrieval_seconds",
    "learning_seconds",
    "failures",
]


@dataclass(frozen=True)
class SyntheticGraphSpec:
    """Seeded generator spec: Erdos-Renyi (param = p) or preferential
    attachment (param = edges per new node)."""

    kind: str  # erdos_renyi | preferential_attachment
    n: int
    param: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("erdos_renyi", "preferential_attachment"):
            raise ValueError(f"unknown graph kind {self.kind!r}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.kind == "erdos_renyi" and not (0.0 < self.param <= 1.0):
            raise ValueError("p must lie in (0, 1]")
        if self.kind == "preferential_attachment" and self.param < 1:
            raise ValueError("m must be >= 1")

    @property
    def label(self) -> str:
        short = "er" if self.kind == "erdos_renyi" else "pa"
        return f"{short}-n{self.n}-{self.param:g}-s{self.seed}"


def parse_graph_spec(text: str) -> SyntheticGraphSpec:
    """Parse ``er:n=100,p=0.1,seed=7`` / ``pa:n=100,m=3,seed=7`` specs."""
    kind_token, sep, rest = text.partition(":")
    if not sep or kind_token not in ("er", "pa"):
        raise ValueError(f"graph spec must start with 'er:' or 'pa:', got {text!r}")
    params: dict = {}
    for item in rest.split(","):
        if not item:
            continue
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"malformed graph spec item {item!r}")
        params[key.strip()] = val.strip()
    try:
        n = int(params.pop("n"))
    except KeyError:
        raise ValueError("graph spec needs n=<count>")
    seed = int(params.pop("seed", "0"))
    key = "p" if kind_token == "er" else "m"
    try:
        param = float(params.pop(key))
    except KeyError:
        raise ValueError(f"graph spec needs {key}=<value>")
    if params:
        raise ValueError(f"unknown graph spec parameter {sorted(params)[0]!r}")
    kind = "erdos_renyi" if kind_token == "er" else "preferential_attachment"
    return SyntheticGraphSpec(kind=kind, n=n, param=param, seed=seed)


def _pair_from_linear(n: int, ks: np.ndarray):
    """Map linear indices over the upper triangle to (u, v) pairs, u < v."""
    # off(u) = number of pairs whose first endpoint is < u
    kf = ks.astype(np.float64)
    u = np.floor((2 * n - 1 - np.sqrt((2 * n - 1) ** 2 - 8 * kf)) / 2).astype(np.int64)
    u = np.clip(u, 0, n - 2)

    def off(x):
        return x * (2 * n - x - 1) // 2

    # float guess can be off by one either way; fix exactly
    too_big = off(u) > ks
    while np.any(too_big):
        u[too_big] -= 1
        too_big = off(u) > ks
    too_small = off(u + 1) <= ks
    while np.any(too_small):
        u[too_small] += 1
        too_small = off(u + 1) <= ks
    v = ks - off(u) + u + 1
    return u, v


def _erdos_renyi_edges(n: int, p: float, rng) -> list:
    total = n * (n - 1) // 2
    if p >= 1.0:
        ks = np.arange(total, dtype=np.int64)
    else:
        # geometric skip sampling over the linear pair space
        picks = []
        pos = -1
        while pos < total:
            gaps = rng.geometric(p, size=4096).astype(np.int64)
            run = pos + np.cumsum(gaps)
            inside = run[run < total]
            picks.append(inside)
            if run[-1] >= total:
                break
            pos = int(run[-1])
        ks = np.concatenate(picks) if picks else np.empty(0, dtype=np.int64)
        if ks.size == 0:
            return []
    u, v = _pair_from_linear(n, ks)
    return list(zip(u.tolist(), v.tolist()))


def _preferential_attachment_edges(n: int, m: int, rng) -> list:
    edges = []
    repeated: list = []
    for v in range(m, n):
        want = min(m, v)
        targets: set = set()
        if not repeated:
            targets = set(range(want))
        else:
            while len(targets) < want:
                draw = rng.integers(0, len(repeated), size=want * 2)
                for d in draw:
                    targets.add(repeated[int(d)])
                    if len(targets) >= want:
                        break
        for t in sorted(targets):
            edges.append((v, t))
            repeated.append(v)
            repeated.append(t)
    return edges


def gen_graph(spec: SyntheticGraphSpec) -> Graph:
    """Generate the seeded synthetic graph described by ``spec``.

    Preferential attachment is connected by construction; Erdos-Renyi may
    not be, which is logged as a warning.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "erdos_renyi":
        edges = _erdos_renyi_edges(spec.n, float(spec.param), rng)
    else:
        edges = _preferential_attachment_edges(spec.n, int(spec.param), rng)
    g = build_graph(edges, node_count=spec.n, directed=False)
    if spec.kind == "erdos_renyi" and not is_connected(g):
        logger.warning("generated graph %s is disconnected", spec.label)
    return g


def is_connected(g: Graph) -> bool:
    if g.node_count == 0:
        return True
    sub = bfs_expand(g, [0], hops=g.node_count)
    return sub.node_count == g.node_count


# ---------------------------------------------------------------------------
# Naive reference implementations
# ---------------------------------------------------------------------------


class NaiveGraph:
    """Hash-map adjacency twin of a Graph (dict of dicts, like classic
    pure-Python graph libraries). Building it is setup cost, analogous to
    importing into such a library; traversal state is allocated per call."""

    def __init__(self, g: Graph):
        self.node_count = g.node_count
        self.directed = g.directed
        self.uniform_weight = g.uniform_weight
        adj: dict = {u: {} for u in range(g.node_count)}
        for u in range(g.node_count):
            s, e = int(g.offsets[u]), int(g.offsets[u + 1])
            for pos in range(s, e):
                v = int(g.neighbors[pos])
                adj[u][v] = 1.0 if g.weights is None else float(g.weights[pos])
        self.adj = adj
        self.graph = g


def _as_naive(g) -> NaiveGraph:
    return g if isinstance(g, NaiveGraph) else NaiveGraph(g)


def naive_bfs(
    g,
    seeds: Iterable[int],
    hops: int,
    fanout_cap: Optional[int] = None,
    max_nodes: Optional[int] = None,
) -> set:
    """Reference BFS over dict adjacency; same admission rules and tie-breaks
    as the optimized kernel, returned as a plain node set."""
    ng = _as_naive(g)
    seed_list = sorted(set(int(s) for s in seeds))
    if not seed_list:
        raise ValueError("seed set must be nonempty")
    for s in seed_list:
        if not 0 <= s < ng.node_count:
            raise ValueError(f"seed {s} out of range [0, {ng.node_count})")
    cap = fanout_cap if fanout_cap is not None else float("inf")
    budget = max_nodes if max_nodes is not None else float("inf")
    visited = set(seed_list)
    depth = {s: 0 for s in seed_list}
    queue = list(seed_list)
    head = 0
    while head < len(queue):
        u = queue[head]
        head += 1
        du = depth[u]
        if du >= hops:
            continue
        if len(visited) >= budget:
            break
        taken = 0
        for v in ng.adj[u]:
            if taken >= cap or len(visited) >= budget:
                break
            if v not in visited:
                visited.add(v)
                depth[v] = du + 1
                queue.append(v)
                taken += 1
    return visited


def _naive_uniform_ball(ng: NaiveGraph, source: int, targets: set):
    w0 = ng.uniform_weight
    dist = {source: 0.0}
    parent = {source: -1}
    queue = [source]
    want = set(targets) - {source}
    head = 0
    while head < len(queue) and want:
        u = queue[head]
        head += 1
        du = dist[u]
        for v in ng.adj[u]:
            if v not in dist:
                dist[v] = du + w0
                parent[v] = u
                queue.append(v)
                want.discard(v)
                if not want:
                    return dist, parent, want
    return dist, parent, want


def _naive_dijkstra_ball(ng: NaiveGraph, source: int, targets: set):
    import heapq

    dist = {source: 0.0}
    parent = {source: -1}
    settled: set = set()
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
        for v, w in ng.adj[u].items():
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, parent, want


def naive_steiner(g, terminals: Iterable[int]) -> Subgraph:
    """Reference Steiner 2-approximation over dict adjacency.

    Algorithmically identical to ``steiner_subgraph`` (same closure, MST,
    expansion, and pruning rules); only the traversal machinery differs.
    """
    ng = _as_naive(g)
    if ng.directed:
        raise ValueError("naive_steiner requires an undirected graph")
    term_list = sorted(set(int(t) for t in terminals))
    if not term_list:
        raise ValueError("terminal set must be nonempty")
    for t in term_list:
        if not 0 <= t < ng.node_count:
            raise ValueError(f"seed {t} out of range [0, {ng.node_count})")
    if len(term_list) == 1:
        return _single_node_subgraph(ng.graph, term_list[0], "steiner", None)
    term_set = set(term_list)
    uniform = ng.uniform_weight is not None
    dists = []
    parents = []
    for i, s in enumerate(term_list[:-1]):
        later = set(term_list[i + 1 :])
        if uniform:
            dist, parent, missing = _naive_uniform_ball(ng, s, later)
        else:
            dist, parent, missing = _naive_dijkstra_ball(ng, s, later)
        if missing:
            x = min(missing)
            raise ValueError(
                f"terminals {s} and {x} lie in different connected components"
            )
        dists.append(dist)
        parents.append(parent)

    def closure(i, j):
        a, b = (i, j) if i < j else (j, i)
        return dists[a][term_list[b]]

    mst = _prim_closure(closure, len(term_list))
    union: dict = {}
    for i, j in mst:
        a, b = (i, j) if i < j else (j, i)
        x = term_list[b]
        src = term_list[a]
        while x != src:
            p = parents[a][x]
            key = (min(p, x), max(p, x))
            union[key] = ng.adj[key[0]][key[1]]
            x = p
    tree = _kruskal([(u, v, w) for (u, v), w in union.items()])
    tree = _prune_leaves(tree, term_set)
    return _assemble_steiner(ng.graph, term_list, tree, None)


# ---------------------------------------------------------------------------
# Timing harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchConfig:
    methods: tuple = ("bfs", "steiner")
    hops: int = 2
    fanout_cap: Optional[int] = None
    max_nodes: Optional[int] = None
    terminals: int = 3
    terminal_hops: int = 2
    reps: int = 1
    seed: int = 0
    warmup: bool = True
    cooldown_seconds: float = 0.0
    learning_seconds: float = 0.0
    workers: int = 1  # opt-in parallelism for the batched side only

    def __post_init__(self):
        for m in self.methods:
            if m not in ("bfs", "steiner"):
                raise ValueError(f"unknown bench method {m!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.terminals < 2:
            raise ValueError("terminals must be >= 2")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class BenchRecord:
    graph: str
    method: str
    impl: str
    queries: int
    repetition: int
    retrieval_seconds: float
    learning_seconds: float
    failures: int


def _sample_queries(g: Graph, count: int, cfg: BenchConfig):
    """Seeded query nodes plus per-query Steiner terminal sets.

    Terminals are the query node and up to ``terminals - 1`` companions drawn
    from its neighborhood, cycling the companion radius through
    ``1..terminal_hops``. That keeps instances local the way seed sets
    retrieved by similarity are, with a controlled spread.
    """
    rng = np.random.default_rng(cfg.seed)
    qnodes = rng.integers(0, g.node_count, size=count).astype(np.int64)
    scratch = ScratchSpace(g.node_count)
    terminal_sets = []
    for q in qnodes.tolist():
        balls = [
            batch_bfs_nodes(g, [[q]], hops=r, scratch=scratch)[0].copy()
            for r in range(1, cfg.terminal_hops + 1)
        ]
        chosen = {q}
        for i in range(cfg.terminals - 1):
            pool = balls[i % cfg.terminal_hops]
            pool = pool[~np.isin(pool, sorted(chosen))]
            if pool.size == 0:
                continue
            chosen.add(int(pool[rng.integers(pool.size)]))
        terminal_sets.append(sorted(chosen))
    return qnodes, terminal_sets


def _run_naive(ng: NaiveGraph, method: str, qnodes, terminal_sets, cfg: BenchConfig, count):
    # streaming consumption: compute each result, hand it off, drop it
    failures = 0
    if method == "bfs":
        for q in qnodes[:count].tolist():
            naive_bfs(ng, [q], cfg.hops, cfg.fanout_cap, cfg.max_nodes)
    else:
        for ts in terminal_sets[:count]:
            try:
                naive_steiner(ng, ts)
            except ValueError:
                failures += 1
    return failures


_BFS_CHUNK = 1000


def _run_optimized(g: Graph, method: str, qnodes, terminal_sets, cfg: BenchConfig, count):
    # per-batch setup (scratch allocation) is part of the timed cost; it is
    # what the batched side amortizes over the whole query set
    scratch = ScratchSpace(g.node_count) if cfg.workers <= 1 else None
    if method == "bfs":
        # membership kernel in bounded chunks: same result as naive_bfs (a
        # node set per query), consumed chunk by chunk like the naive loop
        chunks = list(range(0, count, _BFS_CHUNK))

        def one_bfs_chunk(lo, scr):
            hi = min(lo + _BFS_CHUNK, count)
            batch_bfs_nodes(
                g,
                qnodes[lo:hi, None],
                hops=cfg.hops,
                fanout_cap=cfg.fanout_cap,
                max_nodes=cfg.max_nodes,
                scratch=scr,
            )

        if cfg.workers <= 1:
            for lo in chunks:
                one_bfs_chunk(lo, scratch)
        else:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [
                    pool.submit(one_bfs_chunk, lo, ScratchSpace(g.node_count))
                    for lo in chunks
                ]
                for f in futures:
                    f.result()
        return 0
    # chunked batched trees with shared epoch-stamped scratch, consumed and
    # dropped chunk by chunk like the naive loop drops its results
    rcfg = RetrievalConfig(method="steiner", hops=cfg.hops)
    failures = 0
    for lo in range(0, count, _BFS_CHUNK):
        hi = min(lo + _BFS_CHUNK, count)
        results = batch_retrieve(
            g, terminal_sets[lo:hi], rcfg, scratch=scratch, workers=cfg.workers
        )
        failures += sum(1 for r in results if not isinstance(r, Subgraph))
    return failures


def run_bench(
    spec: SyntheticGraphSpec,
    query_counts: Sequence[int],
    cfg: BenchConfig = BenchConfig(),
    graph: Optional[Graph] = None,
) -> list:
    """Time naive vs optimized retrieval at each query count.

    Query sets nest testably: the queries at a smaller count are a prefix of
    those at a larger one. Each (method, impl) gets an untimed warm-up pass
    before its repetitions; wall time uses the monotonic clock. Per-query
    failures (e.g. cross-component terminals) are counted, not raised.
    """
    if not query_counts:
        raise ValueError("query_counts must be nonempty")
    g = graph if graph is not None else gen_graph(spec)
    ng = NaiveGraph(g)
    max_q = max(query_counts)
    qnodes, terminal_sets = _sample_queries(g, max_q, cfg)
    records = []
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for method in cfg.methods:
            # repetition is the outer loop: within one repetition, every
            # (impl, count) measurement runs back to back, so comparisons
            # across counts and implementations see the same machine state
            for rep in range(-1 if cfg.warmup else 0, cfg.reps):
                for count in query_counts:
                    for impl in ("naive", "optimized"):
                        if cfg.cooldown_seconds > 0:
                            time.sleep(cfg.cooldown_seconds)
                        start = time.perf_counter()
                        if impl == "naive":
                            failures = _run_naive(
                                ng, method, qnodes, terminal_sets, cfg, count
                            )
                        else:
                            failures = _run_optimized(
                                g, method, qnodes, terminal_sets, cfg, count
                            )
                        elapsed = time.perf_counter() - start
                        gc.collect()
                        if rep < 0:
                            continue  # warm-up pass: measured work, untimed record
                        records.append(
                            BenchRecord(
                                graph=spec.label,
                                method=method,
                                impl=impl,
                                queries=int(count),
                                repetition=rep,
                                retrieval_seconds=elapsed,
                                learning_seconds=cfg.learning_seconds,
                                failures=failures,
                            )
                        )
    finally:
        if gc_was_enabled:
            gc.enable()
        gc.collect()
    return records


def write_bench_csv(records: Sequence[BenchRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.graph,
                    r.method,
                    r.impl,
                    r.queries,
                    r.repetition,
                    repr(r.retrieval_seconds),
                    repr(r.learning_seconds),
                    r.failures,
                ]
            )
