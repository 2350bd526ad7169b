"""Application recipes and evaluation metrics.

Feature completion with graph-aware and baseline methods, text-overlap
scoring (unigram, bigram, longest common subsequence), binary-relevance
ranking metrics, and an abstract-generation harness over the pipeline.
"""

from __future__ import annotations

import csv
import logging
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import Graph, NodeAttributes, Provenance, Subgraph
from .index import EmbeddingIndex, knn_query
from .pipeline import RagPipeline, _answer_from_subgraph
from .retrieval import (
    RetrievalConfig,
    ScratchSpace,
    _dispatch_query,
    ppr_scores,
    transition_matrix,
)

logger = logging.getLogger(__name__)

__all__ = [
    "CompletionMethod",
    "Score",
    "RougeScores",
    "complete_features",
    "reconstruction_error",
    "rouge",
    "recall_at_k",
    "ndcg_at_k",
    "abstract_generation_run",
    "write_report_csv",
    "COMPLETION_TAGS",
    "CONTEXT_MODES",
]

COMPLETION_TAGS = (
    "fill0",
    "neigh_mean",
    "ppr",
    "knn_feat",
    "knn_neigh",
    "subgraph_bfs",
    "subgraph_dense",
    "subgraph_steiner",
)

CONTEXT_MODES = (
    "self_node",
    "knn",
    "subgraph_bfs",
    "subgraph_dense",
    "subgraph_steiner",
)

_SUBGRAPH_METHOD = {
    "subgraph_bfs": "bfs",
    "subgraph_dense": "dense",
    "subgraph_steiner": "steiner",
}


@dataclass(frozen=True)
class CompletionMethod:
    """A completion strategy tag plus its knobs (k, alpha, hops, max_nodes)."""

    tag: str
    k: int = 10
    alpha: float = 0.15
    iters: int = 50
    hops: int = 2
    max_nodes: Optional[int] = 32

    def __post_init__(self):
        if self.tag not in COMPLETION_TAGS:
            raise ValueError(f"unknown completion method {self.tag!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if self.hops < 1:
            raise ValueError("hops must be >= 1")
        if self.max_nodes is not None and self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")


def _mean_rows(features: np.ndarray, rows: np.ndarray, what: str, node: int):
    if rows.size == 0:
        logger.warning("%s: no unmasked contributors for node %d, falling back to zero", what, node)
        return np.zeros(features.shape[1], dtype=np.float64)
    return features[rows].mean(axis=0)


def complete_features(
    g: Graph,
    attrs: NodeAttributes,
    mask: np.ndarray,
    method: CompletionMethod,
    index: Optional[EmbeddingIndex] = None,
) -> np.ndarray:
    """Fill masked feature rows; unmasked rows pass through unchanged.

    Methods that retrieve by similarity (knn_feat, knn_neigh, subgraph_*)
    need ``index`` built over an observed modality; its rows select nearest
    unmasked nodes, whose feature rows are then averaged. When a weighted
    method finds no unmasked contributor the row falls back to zero with a
    warning.
    """
    if attrs.features is None:
        raise ValueError("attributes carry no features")
    if mask.shape != (attrs.node_count,):
        raise ValueError("mask must be a boolean array aligned with nodes")
    needs_index = method.tag in ("knn_feat", "knn_neigh", "subgraph_bfs", "subgraph_dense", "subgraph_steiner")
    if needs_index and index is None:
        raise ValueError(f"method {method.tag!r} needs an observed-modality index")
    feats = attrs.features
    out = feats.copy()
    masked_ids = np.flatnonzero(mask)
    unmasked = ~mask
    if method.tag == "fill0":
        out[masked_ids] = 0.0
        return out
    transition = transition_matrix(g) if method.tag == "ppr" else None
    masked_set = set(masked_ids.tolist())
    scratch = ScratchSpace(g.node_count)
    for u in masked_ids.tolist():
        if method.tag == "neigh_mean":
            nbrs = g.neighbors[g.offsets[u] : g.offsets[u + 1]]
            rows = nbrs[unmasked[nbrs]]
            out[u] = _mean_rows(feats, rows, "neigh_mean", u)
        elif method.tag == "ppr":
            scores = ppr_scores(g, [u], alpha=method.alpha, iters=method.iters, _transition=transition)
            w = np.where(unmasked, scores, 0.0)
            total = float(w.sum())
            if total <= 0.0:
                logger.warning("ppr: no unmasked mass for node %d, falling back to zero", u)
                out[u] = 0.0
            else:
                out[u] = (w[:, None] * feats).sum(axis=0) / total
        else:
            exclude = masked_set | {u}
            hits = knn_query(index, index.matrix[u], method.k, exclude=exclude)
            hit_ids = np.array([h.node for h in hits], dtype=np.int64)
            if method.tag == "knn_feat":
                out[u] = _mean_rows(feats, hit_ids, "knn_feat", u)
            elif method.tag == "knn_neigh":
                nbr_rows = []
                for h in hit_ids.tolist():
                    nbrs = g.neighbors[g.offsets[h] : g.offsets[h + 1]]
                    nbr_rows.append(nbrs[unmasked[nbrs]])
                rows = (
                    np.unique(np.concatenate(nbr_rows))
                    if nbr_rows
                    else np.empty(0, dtype=np.int64)
                )
                out[u] = _mean_rows(feats, rows, "knn_neigh", u)
            else:
                cfg = RetrievalConfig(
                    method=_SUBGRAPH_METHOD[method.tag],
                    hops=method.hops,
                    max_nodes=method.max_nodes,
                )
                seed_scores = {h.node: h.score for h in hits}
                try:
                    sub = _dispatch_query(g, hit_ids.tolist(), cfg, seed_scores, scratch)
                    members = sub.nodes
                except (ValueError, KeyError) as exc:
                    logger.warning(
                        "%s: retrieval failed for node %d (%s); using the seed nodes",
                        method.tag,
                        u,
                        exc,
                    )
                    members = hit_ids
                rows = members[unmasked[members]] if members.size else members
                out[u] = _mean_rows(feats, rows, method.tag, u)
    return out


def reconstruction_error(
    completed: np.ndarray,
    ground_truth: np.ndarray,
    mask: np.ndarray,
    metric: str = "mse",
) -> float:
    """Average reconstruction error over masked rows only."""
    if completed.shape != ground_truth.shape:
        raise ValueError("completed and ground_truth shapes differ")
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        return 0.0
    if metric == "mse":
        diff = completed[rows] - ground_truth[rows]
        return float(np.mean(diff * diff))
    if metric == "cosine":
        a = completed[rows]
        b = ground_truth[rows]
        na = np.sqrt((a * a).sum(axis=1))
        nb = np.sqrt((b * b).sum(axis=1))
        denom = na * nb
        cos = np.zeros(rows.size, dtype=np.float64)
        ok = denom > 0
        cos[ok] = (a[ok] * b[ok]).sum(axis=1) / denom[ok]
        return float(np.mean(1.0 - cos))
    raise ValueError(f"unknown metric {metric!r}")


# ---------------------------------------------------------------------------
# Text overlap metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class RougeScores:
    rouge1: Score
    rouge2: Score
    rougeL: Score


def _tokenize(text: str) -> list:
    return re.findall(r"[a-z0-9]+", text.lower())


def _ngrams(tokens: list, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _prf(overlap: int, cand_total: int, ref_total: int) -> Score:
    p = overlap / cand_total if cand_total else 0.0
    r = overlap / ref_total if ref_total else 0.0
    f1 = 2 * p * r / (p + r) if (p + r) else 0.0
    return Score(precision=p, recall=r, f1=f1)


def _lcs_len(a: list, b: list) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge(candidate: str, reference: str) -> RougeScores:
    """Unigram/bigram clipped-count overlap and LCS-based scores.

    Tokenization lowercases and splits on non-alphanumerics; empty against
    anything scores all zeros.
    """
    cand = _tokenize(candidate)
    ref = _tokenize(reference)
    scores = []
    for n in (1, 2):
        cg, rg = _ngrams(cand, n), _ngrams(ref, n)
        overlap = sum(min(c, rg[gram]) for gram, c in cg.items())
        scores.append(_prf(overlap, sum(cg.values()), sum(rg.values())))
    lcs = _lcs_len(cand, ref)
    scores.append(_prf(lcs, len(cand), len(ref)))
    return RougeScores(rouge1=scores[0], rouge2=scores[1], rougeL=scores[2])


# ---------------------------------------------------------------------------
# Ranking metrics
# ---------------------------------------------------------------------------


def recall_at_k(ranked: Sequence[int], relevant: set, k: int) -> float:
    """Fraction of relevant items found in the top k (0.0 when none exist)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not relevant:
        return 0.0
    top = set(list(ranked)[:k])
    return len(top & set(relevant)) / len(relevant)


def ndcg_at_k(ranked: Sequence[int], relevant: set, k: int) -> float:
    """Binary-relevance NDCG with the ideal DCG over min(k, |relevant|)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not relevant:
        return 0.0
    rel = set(relevant)
    dcg = sum(
        1.0 / np.log2(i + 2) for i, item in enumerate(list(ranked)[:k]) if item in rel
    )
    ideal = sum(1.0 / np.log2(i + 2) for i in range(min(k, len(rel))))
    return float(dcg / ideal) if ideal else 0.0


# ---------------------------------------------------------------------------
# Abstract generation
# ---------------------------------------------------------------------------


def _context_subgraph(p: RagPipeline, node: int, mode: str, k: int, scratch) -> Subgraph:
    g = p.graph
    if mode == "self_node":
        return Subgraph(
            parent=g,
            nodes=np.array([node], dtype=np.int64),
            edge_src=np.empty(0, dtype=np.int64),
            edge_dst=np.empty(0, dtype=np.int64),
            edge_weight=None,
            provenance=Provenance(seeds=(node,), method="self_node", scores=np.ones(1)),
        )
    hits = knn_query(p.index, p.index.matrix[node], k, exclude={node})
    if mode == "knn":
        order = np.argsort([h.node for h in hits])
        nodes = np.array(sorted(h.node for h in hits), dtype=np.int64)
        scores = np.array([h.score for h in hits], dtype=np.float64)[order]
        return Subgraph(
            parent=g,
            nodes=nodes,
            edge_src=np.empty(0, dtype=np.int64),
            edge_dst=np.empty(0, dtype=np.int64),
            edge_weight=None,
            provenance=Provenance(
                seeds=tuple(sorted(h.node for h in hits)), method="knn", scores=scores
            ),
        )
    cfg = RetrievalConfig(
        method=_SUBGRAPH_METHOD[mode],
        hops=p.retrieval_cfg.hops,
        fanout_cap=p.retrieval_cfg.fanout_cap,
        max_nodes=p.retrieval_cfg.max_nodes,
    )
    seed_scores = {h.node: h.score for h in hits}
    sub = _dispatch_query(g, [h.node for h in hits], cfg, seed_scores, scratch)
    return _drop_node(sub, node)


def _drop_node(sub: Subgraph, node: int) -> Subgraph:
    """Remove one node (and its edges) from a subgraph, keeping provenance."""
    if node not in set(sub.nodes.tolist()):
        return sub
    keep = sub.nodes != node
    ekeep = (sub.edge_src != node) & (sub.edge_dst != node)
    return Subgraph(
        parent=sub.parent,
        nodes=sub.nodes[keep],
        edge_src=sub.edge_src[ekeep],
        edge_dst=sub.edge_dst[ekeep],
        edge_weight=None if sub.edge_weight is None else sub.edge_weight[ekeep],
        provenance=Provenance(
            seeds=tuple(s for s in sub.provenance.seeds if s != node),
            method=sub.provenance.method,
            scores=sub.provenance.scores[keep],
        ),
    )


def abstract_generation_run(
    p: RagPipeline,
    query_nodes: Iterable[int],
    context_mode: str,
    references: Optional[Sequence[Optional[str]]] = None,
    k: int = 5,
    query_text: str = "Write an abstract for the target document.",
) -> dict:
    """Generate an abstract per query node and score it against a reference.

    ``references`` defaults to the nodes' own texts, which the retrieval
    context then must not leak: all modes except self_node exclude the query
    node from retrieval and from the serialized context. Nodes without a
    reference are skipped and reported.
    """
    if context_mode not in CONTEXT_MODES:
        raise ValueError(f"unknown context mode {context_mode!r}")
    texts = p.attrs.texts if p.attrs is not None and p.attrs.texts is not None else None
    scratch = ScratchSpace(p.graph.node_count)
    rows = []
    skipped = []
    for node in query_nodes:
        ref = references[node] if references is not None else (texts[node] if texts else None)
        if ref is None:
            skipped.append({"node": int(node), "reason": "missing reference text"})
            continue
        sub = _context_subgraph(p, int(node), context_mode, k, scratch)
        answer = _answer_from_subgraph(p, sub, query_text, [])
        scores = rouge(answer.result.text, ref)
        rows.append(
            {
                "node": int(node),
                "method": context_mode,
                "generated": answer.result.text,
                "included_nodes": list(answer.bundle.included_nodes),
                "rouge1": scores.rouge1.f1,
                "rouge2": scores.rouge2.f1,
                "rougeL": scores.rougeL.f1,
            }
        )
    return {"rows": rows, "skipped": skipped}


def write_report_csv(rows: Sequence[dict], path, metrics=("rouge1", "rouge2", "rougeL")) -> None:
    """Long-form CSV: one row per (node, method, metric, value), then one
    summary row per method with the metric means."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "method", "metric", "value"])
        by_method: dict = {}
        for row in rows:
            for metric in metrics:
                if metric in row:
                    writer.writerow([row["node"], row["method"], metric, repr(float(row[metric]))])
                    by_method.setdefault((row["method"], metric), []).append(float(row[metric]))
        for (method, metric), vals in sorted(by_method.items()):
            writer.writerow(["summary", method, f"mean_{metric}", repr(float(np.mean(vals)))])
