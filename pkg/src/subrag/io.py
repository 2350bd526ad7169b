"""File import/export: TSV edge lists, JSONL node records, graph bundles.

External ids (arbitrary ints or strings) are mapped to dense ids on load; the
mapping is persisted in the bundle's ``meta.json`` so round-trips are exact.
"""

from __future__ import annotations

import json
import os
from typing import Optional

import numpy as np

from .graph import Graph, NodeAttributes, build_graph

__all__ = [
    "GraphFormatError",
    "load_edge_list",
    "load_node_records",
    "save_graph",
    "load_graph",
]


class GraphFormatError(ValueError):
    """Malformed graph/record file; message names the file and line."""


def _parse_edge_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise GraphFormatError(
                    f"{path}:{lineno}: expected 'src<TAB>dst[<TAB>weight]', got {line!r}"
                )
            w = None
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise GraphFormatError(
                        f"{path}:{lineno}: weight {parts[2]!r} is not a number"
                    )
            yield lineno, parts[0], parts[1], w


def _all_dense_ints(tokens) -> bool:
    for t in tokens:
        if not t.lstrip("-").isdigit():
            return False
        if int(t) < 0:
            return False
    return True


def load_edge_list(
    path,
    directed: bool = False,
    node_count: Optional[int] = None,
    id_map: Optional[dict] = None,
):
    """Load a TSV edge list into a Graph.

    Returns ``(graph, id_map)`` where ``id_map`` maps the file's node tokens
    to dense ids. When every token is a non-negative integer the ids are used
    as-is (identity mapping, ``node_count = max id + 1``); otherwise tokens
    are assigned dense ids in first-appearance order.
    """
    rows = list(_parse_edge_lines(path))
    tokens = [t for _, s, d, _ in rows for t in (s, d)]
    if id_map is not None:
        mapping = dict(id_map)
        for lineno, s, d, _ in rows:
            for t in (s, d):
                if t not in mapping:
                    raise GraphFormatError(f"{path}:{lineno}: unknown node id {t!r}")
    elif _all_dense_ints(tokens):
        mapping = {t: int(t) for t in tokens}
    else:
        mapping = {}
        for t in tokens:
            if t not in mapping:
                mapping[t] = len(mapping)
    if node_count is None:
        node_count = (max(mapping.values()) + 1) if mapping else 0
    edges = []
    for lineno, s, d, w in rows:
        u, v = mapping[s], mapping[d]
        if u >= node_count or v >= node_count:
            raise GraphFormatError(
                f"{path}:{lineno}: node id {max(u, v)} >= node_count {node_count}"
            )
        edges.append((u, v) if w is None else (u, v, w))
    try:
        graph = build_graph(edges, node_count=node_count, directed=directed)
    except ValueError as exc:
        raise GraphFormatError(f"{path}: {exc}") from exc
    return graph, mapping


def load_node_records(path, graph: Graph, id_map: Optional[dict] = None) -> NodeAttributes:
    """Load JSONL node records (`id`, optional `text`, `feat`, `label`).

    Every record must refer to a node of ``graph``; feature rows must share
    one dimension. Missing fields leave that node's attribute absent.
    """
    n = graph.node_count
    texts: list = [None] * n
    labels = None
    feat_rows: dict = {}
    feat_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphFormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})")
            if not isinstance(rec, dict) or "id" not in rec:
                raise GraphFormatError(f"{path}:{lineno}: record must be an object with 'id'")
            raw_id = rec["id"]
            if id_map is not None:
                key = str(raw_id)
                if key not in id_map:
                    raise GraphFormatError(f"{path}:{lineno}: dangling node id {raw_id!r}")
                node = id_map[key]
            elif isinstance(raw_id, int):
                node = raw_id
            else:
                raise GraphFormatError(
                    f"{path}:{lineno}: string id {raw_id!r} requires an id mapping"
                )
            if not 0 <= node < n:
                raise GraphFormatError(f"{path}:{lineno}: dangling node id {raw_id!r}")
            if "text" in rec and rec["text"] is not None:
                texts[node] = str(rec["text"])
            if "feat" in rec and rec["feat"] is not None:
                vec = np.asarray(rec["feat"], dtype=np.float64)
                if vec.ndim != 1:
                    raise GraphFormatError(f"{path}:{lineno}: 'feat' must be a flat list")
                if feat_dim is None:
                    feat_dim = vec.shape[0]
                elif vec.shape[0] != feat_dim:
                    raise GraphFormatError(
                        f"{path}:{lineno}: feature dimension {vec.shape[0]} != {feat_dim}"
                    )
                feat_rows[node] = vec
            if "label" in rec and rec["label"] is not None:
                if labels is None:
                    labels = np.full(n, -1, dtype=np.int64)
                labels[node] = int(rec["label"])
    features = None
    if feat_rows:
        features = np.zeros((n, feat_dim), dtype=np.float64)
        for node, vec in feat_rows.items():
            features[node] = vec
    has_text = any(t is not None for t in texts)
    return NodeAttributes(
        node_count=n,
        texts=texts if has_text else None,
        features=features,
        labels=labels,
    )


def save_graph(graph: Graph, attrs: Optional[NodeAttributes], out_dir, id_map=None) -> None:
    """Write a bundle directory: ``graph.tsv``, ``nodes.jsonl``, ``meta.json``."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "graph.tsv"), "w", encoding="utf-8") as fh:
        for u in range(graph.node_count):
            s, e = graph.offsets[u], graph.offsets[u + 1]
            for pos in range(s, e):
                v = int(graph.neighbors[pos])
                if not graph.directed and v < u:
                    continue
                if graph.weights is None:
                    fh.write(f"{u}\t{v}\n")
                else:
                    fh.write(f"{u}\t{v}\t{float(graph.weights[pos])!r}\n")
    with open(os.path.join(out_dir, "nodes.jsonl"), "w", encoding="utf-8") as fh:
        if attrs is not None:
            for node in range(graph.node_count):
                rec: dict = {"id": node}
                if attrs.texts is not None and attrs.texts[node] is not None:
                    rec["text"] = attrs.texts[node]
                if attrs.features is not None:
                    rec["feat"] = attrs.features[node].tolist()
                if attrs.labels is not None and attrs.labels[node] != -1:
                    rec["label"] = int(attrs.labels[node])
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    meta = {
        "node_count": graph.node_count,
        "directed": graph.directed,
        "id_map": {str(k): v for k, v in id_map.items()} if id_map else None,
    }
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_graph(bundle_dir):
    """Load a bundle directory; returns ``(graph, attrs, meta)``."""
    meta_path = os.path.join(bundle_dir, "meta.json")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    graph, _ = load_edge_list(
        os.path.join(bundle_dir, "graph.tsv"),
        directed=bool(meta["directed"]),
        node_count=int(meta["node_count"]),
        id_map={str(i): i for i in range(int(meta["node_count"]))},
    )
    nodes_path = os.path.join(bundle_dir, "nodes.jsonl")
    attrs = None
    if os.path.exists(nodes_path) and os.path.getsize(nodes_path) > 0:
        attrs = load_node_records(nodes_path, graph)
    return graph, attrs, meta
