"""Compiled CSR traversal kernels.

All kernels are epoch-stamped: a slot of ``stamp`` counts as visited only when
it equals the current epoch, so the same scratch arrays serve every query of a
batch without clearing. Neighbor scans run in ascending-id order (CSR
adjacency is sorted), which fixes every tie deterministically.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "bfs_expand_kernel",
    "finalize_bfs_kernel",
    "bfs_sssp_until_kernel",
    "bfs_batch_nodes_driver",
]


@njit(cache=True, nogil=True)
def bfs_expand_kernel(
    offsets, neighbors, stamp, depth, order, epoch, seeds, hops, fanout_cap, max_nodes
):
    """Bounded BFS from ``seeds``; returns the visited count.

    Seeds are admitted first and never dropped. Each dequeued node admits at
    most ``fanout_cap`` of its lowest-id unvisited neighbors, and admission
    stops globally once ``max_nodes`` nodes are visited. ``order[:count]``
    holds the admission order; ``depth``/``stamp`` entries are valid only for
    this epoch.
    """
    cnt = 0
    for i in range(seeds.shape[0]):
        s = seeds[i]
        if stamp[s] != epoch:
            stamp[s] = epoch
            depth[s] = 0
            order[cnt] = s
            cnt += 1
    head = 0
    while head < cnt:
        u = order[head]
        head += 1
        du = depth[u]
        if du >= hops:
            continue
        if cnt >= max_nodes:
            break
        taken = 0
        for j in range(offsets[u], offsets[u + 1]):
            if taken >= fanout_cap or cnt >= max_nodes:
                break
            v = neighbors[j]
            if stamp[v] != epoch:
                stamp[v] = epoch
                depth[v] = du + 1
                order[cnt] = v
                cnt += 1
                taken += 1
    return cnt


@njit(cache=True, nogil=True)
def finalize_bfs_kernel(
    offsets,
    neighbors,
    stamp,
    depth,
    order,
    epoch,
    cnt,
    directed,
    nodes_out,
    depth_out,
    eu_out,
    ev_out,
    pos_out,
):
    """Sort the visited set and extract its induced edges.

    Must run while ``stamp``/``depth`` still hold the query's epoch. Writes
    sorted node ids with aligned depths, then every induced edge (each once,
    ``u < v``, for undirected graphs) with the arc position for weight lookup.
    Returns the edge count.
    """
    for i in range(cnt):
        nodes_out[i] = order[i]
    nodes_out[:cnt].sort()
    for i in range(cnt):
        depth_out[i] = depth[nodes_out[i]]
    ecnt = 0
    for i in range(cnt):
        u = nodes_out[i]
        for j in range(offsets[u], offsets[u + 1]):
            v = neighbors[j]
            if stamp[v] == epoch:
                if directed or u < v:
                    eu_out[ecnt] = u
                    ev_out[ecnt] = v
                    pos_out[ecnt] = j
                    ecnt += 1
    return ecnt


@njit(cache=True, nogil=True)
def bfs_sssp_until_kernel(
    offsets, neighbors, stamp, dist, parent, order, epoch, source, targets
):
    """Unit-weight SSSP from ``source``, stopping once every target settles.

    Claims follow admission order with ascending neighbor scans; a node's
    parent is its first claimant. Distances are exact level counts. Returns
    the number of still-unsettled targets (0 when all were reached);
    ``dist``/``parent`` are valid for stamped nodes only.
    """
    stamp[source] = epoch
    dist[source] = 0
    parent[source] = -1
    order[0] = source
    cnt = 1
    remaining = 0
    for i in range(targets.shape[0]):
        if targets[i] != source:
            remaining += 1
    if remaining == 0:
        return 0
    head = 0
    while head < cnt and remaining > 0:
        u = order[head]
        head += 1
        du = dist[u]
        for j in range(offsets[u], offsets[u + 1]):
            v = neighbors[j]
            if stamp[v] != epoch:
                stamp[v] = epoch
                dist[v] = du + 1
                parent[v] = u
                order[cnt] = v
                cnt += 1
                for t in range(targets.shape[0]):
                    if targets[t] == v:
                        remaining -= 1
                        break
                if remaining == 0:
                    return 0
    return remaining


@njit(cache=True, nogil=True)
def bfs_batch_nodes_driver(
    offsets,
    neighbors,
    stamp,
    depth,
    order,
    epoch_base,
    seeds_flat,
    seed_offsets,
    hops,
    fanout_cap,
    max_nodes,
    out_nodes,
    out_offsets,
    start_query,
):
    """Many BFS membership queries in one call, no per-query dispatch.

    Query qi runs under epoch ``epoch_base + (qi - start_query)`` with the
    same admission semantics as ``bfs_expand_kernel`` and writes its sorted
    node ids into ``out_nodes`` at ``out_offsets[qi]``. Returns the index of
    the first query that did not fit in ``out_nodes`` (the caller grows the
    buffer, reserves fresh epochs, and resumes there), or the query count
    when everything fit.
    """
    nq = seed_offsets.shape[0] - 1
    pos = out_offsets[start_query]
    for qi in range(start_query, nq):
        epoch = epoch_base + (qi - start_query)
        cnt = 0
        for i in range(seed_offsets[qi], seed_offsets[qi + 1]):
            s = seeds_flat[i]
            if stamp[s] != epoch:
                stamp[s] = epoch
                depth[s] = 0
                order[cnt] = s
                cnt += 1
        head = 0
        while head < cnt:
            u = order[head]
            head += 1
            du = depth[u]
            if du >= hops:
                continue
            if cnt >= max_nodes:
                break
            taken = 0
            for j in range(offsets[u], offsets[u + 1]):
                if taken >= fanout_cap or cnt >= max_nodes:
                    break
                v = neighbors[j]
                if stamp[v] != epoch:
                    stamp[v] = epoch
                    depth[v] = du + 1
                    order[cnt] = v
                    cnt += 1
                    taken += 1
        if pos + cnt > out_nodes.shape[0]:
            return qi
        out = out_nodes[pos : pos + cnt]
        for i in range(cnt):
            out[i] = order[i]
        out.sort()
        pos += cnt
        out_offsets[qi + 1] = pos
    return nq


@njit(cache=True, nogil=True)
def _prim_small(closure, t, mst_from, mst_to):
    """Prim MST over a dense t x t closure; ties keep the earlier update and
    the lowest index, matching the pure-Python route."""
    in_tree = np.zeros(t, dtype=np.int64)
    best_w = np.empty(t, dtype=np.int64)
    best_from = np.zeros(t, dtype=np.int64)
    for j in range(t):
        best_w[j] = closure[0, j]
    in_tree[0] = 1
    for e in range(t - 1):
        pick = -1
        for j in range(t):
            if in_tree[j] == 0 and (pick == -1 or best_w[j] < best_w[pick]):
                pick = j
        mst_from[e] = best_from[pick]
        mst_to[e] = pick
        in_tree[pick] = 1
        for j in range(t):
            if in_tree[j] == 0 and closure[pick, j] < best_w[j]:
                best_w[j] = closure[pick, j]
                best_from[j] = pick
    return t - 1


@njit(cache=True, nogil=True)
def steiner_batch_driver(
    offsets,
    neighbors,
    stamp2d,
    dist2d,
    parent2d,
    order,
    epoch_start,
    terms_flat,
    term_offsets,
    start_query,
    out_eu,
    out_ev,
    out_offsets,
    status,
    bad_src,
    bad_dst,
):
    """Batched uniform-weight Steiner trees, one KMB pipeline per query.

    Per query: early-stopped BFS from each terminal toward the later ones,
    metric-closure MST, path expansion along BFS parents, MST of the union
    (ascending (u, v); weights are all equal), and non-terminal leaf pruning.
    Tree edges land in ``out_eu``/``out_ev`` at ``out_offsets[qi]``; per-query
    ``status`` is 0 for a tree, 1 for disconnected terminals (the offending
    pair goes to ``bad_src``/``bad_dst``), 2 for a work-buffer overflow the
    caller must retry in the reference route. Returns (next_query,
    epochs_used); a next_query below the query count means the output buffer
    must grow before resuming there.
    """
    n = offsets.shape[0] - 1
    nq = term_offsets.shape[0] - 1
    buf_cap = 2048
    keys = np.empty(buf_cap, dtype=np.int64)
    ends = np.empty(2 * buf_cap, dtype=np.int64)
    closure = np.empty((16, 16), dtype=np.int64)
    mst_from = np.empty(16, dtype=np.int64)
    mst_to = np.empty(16, dtype=np.int64)
    epoch = epoch_start
    pos = out_offsets[start_query]
    for qi in range(start_query, nq):
        lo_t = term_offsets[qi]
        t = term_offsets[qi + 1] - lo_t
        terms = terms_flat[lo_t : lo_t + t]
        status[qi] = 0
        # per-terminal early-stopped BFS toward later terminals
        disconnected = False
        for i in range(t - 1):
            epoch += 1
            remaining = bfs_sssp_until_kernel(
                offsets,
                neighbors,
                stamp2d[i],
                dist2d[i],
                parent2d[i],
                order,
                epoch,
                terms[i],
                terms[i + 1 :],
            )
            if remaining > 0:
                for k in range(i + 1, t):
                    if stamp2d[i][terms[k]] != epoch:
                        status[qi] = 1
                        bad_src[qi] = terms[i]
                        bad_dst[qi] = terms[k]
                        break
                disconnected = True
                break
        if disconnected:
            out_offsets[qi + 1] = pos
            continue
        # closure distances (symmetric; pass a holds row a for b > a)
        for a in range(t - 1):
            closure[a, a] = 0
            for b in range(a + 1, t):
                d = dist2d[a][terms[b]]
                closure[a, b] = d
                closure[b, a] = d
        closure[t - 1, t - 1] = 0
        n_mst = _prim_small(closure, t, mst_from, mst_to)
        # expand MST edges to real paths; collect canonical edge keys
        ecnt = 0
        overflow = False
        for e in range(n_mst):
            a = mst_from[e]
            b = mst_to[e]
            if a > b:
                a, b = b, a
            x = terms[b]
            src = terms[a]
            while x != src:
                p = parent2d[a][x]
                lo = p if p < x else x
                hi = x if p < x else p
                if ecnt >= buf_cap:
                    overflow = True
                    break
                keys[ecnt] = lo * n + hi
                ecnt += 1
                x = p
            if overflow:
                break
        if overflow:
            status[qi] = 2
            out_offsets[qi + 1] = pos
            continue
        # dedup
        kslice = keys[:ecnt]
        kslice.sort()
        m_edges = 0
        for i in range(ecnt):
            if i == 0 or keys[i] != keys[i - 1]:
                keys[m_edges] = keys[i]
                m_edges += 1
        # compact node ids
        for i in range(m_edges):
            ends[2 * i] = keys[i] // n
            ends[2 * i + 1] = keys[i] % n
        eslice = ends[: 2 * m_edges]
        nodes_local = np.unique(eslice)
        m_nodes = nodes_local.shape[0]
        # Kruskal in ascending (u, v); all weights equal by uniformity
        uf = np.arange(m_nodes)
        tree_cnt = 0
        for i in range(m_edges):
            u = np.searchsorted(nodes_local, keys[i] // n)
            v = np.searchsorted(nodes_local, keys[i] % n)
            ru = u
            while uf[ru] != ru:
                uf[ru] = uf[uf[ru]]
                ru = uf[ru]
            rv = v
            while uf[rv] != rv:
                uf[rv] = uf[uf[rv]]
                rv = uf[rv]
            if ru != rv:
                uf[ru] = rv
                keys[tree_cnt] = keys[i]  # keep: compact in place
                tree_cnt += 1
        # prune non-terminal leaves (confluent, so any order works)
        deg = np.zeros(m_nodes, dtype=np.int64)
        alive = np.ones(tree_cnt, dtype=np.int64)
        is_term = np.zeros(m_nodes, dtype=np.int64)
        for i in range(t):
            p = np.searchsorted(nodes_local, terms[i])
            if p < m_nodes and nodes_local[p] == terms[i]:
                is_term[p] = 1
        for i in range(tree_cnt):
            deg[np.searchsorted(nodes_local, keys[i] // n)] += 1
            deg[np.searchsorted(nodes_local, keys[i] % n)] += 1
        changed = True
        while changed:
            changed = False
            for i in range(tree_cnt):
                if alive[i] == 0:
                    continue
                u = np.searchsorted(nodes_local, keys[i] // n)
                v = np.searchsorted(nodes_local, keys[i] % n)
                if (deg[u] == 1 and is_term[u] == 0) or (
                    deg[v] == 1 and is_term[v] == 0
                ):
                    alive[i] = 0
                    deg[u] -= 1
                    deg[v] -= 1
                    changed = True
        kept = 0
        for i in range(tree_cnt):
            if alive[i]:
                kept += 1
        if pos + kept > out_eu.shape[0]:
            return qi, epoch - epoch_start
        for i in range(tree_cnt):
            if alive[i]:
                out_eu[pos] = keys[i] // n
                out_ev[pos] = keys[i] % n
                pos += 1
        out_offsets[qi + 1] = pos
    return nq, epoch - epoch_start
