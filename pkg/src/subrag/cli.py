"""Command-line frontend.

One binary, five subcommands: ``build`` (validate and save a graph bundle),
``retrieve`` (batch subgraph retrieval), ``complete`` (feature completion with
reconstruction metrics), ``generate`` (the full pipeline), and ``bench``
(naive-vs-optimized timings). Logs go to stderr; data goes to ``--out`` or
stdout. Exit codes: 0 success, 1 usage/config error, 2 data error, 3
generation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .applications import (
    COMPLETION_TAGS,
    CompletionMethod,
    complete_features,
    reconstruction_error,
)
from .bench import parse_graph_spec, run_bench, write_bench_csv
from .config import ConfigError, load_config
from .generation import GenerationError
from .index import build_index, knn_query
from .io import GraphFormatError, load_edge_list, load_graph, load_node_records, save_graph
from .pipeline import RagPipeline, StageError, hash_embed, hash_embed_texts, mask_features, pipeline_answer
from .retrieval import FailedQuery, ScratchSpace, batch_retrieve, filter_nodes

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_jsonl(path) -> list:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise GraphFormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})")
    return rows


def _write_jsonl(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _build_default_index(attrs, metric: str, hash_dim: int):
    if attrs is not None and attrs.features is not None:
        return build_index(attrs.features, metric=metric)
    if attrs is not None and attrs.texts is not None:
        return build_index(hash_embed_texts(attrs.texts, hash_dim), metric=metric)
    raise GraphFormatError(
        "bundle has neither features nor texts; cannot build a vector index"
    )


def cmd_build(args) -> int:
    graph, id_map = load_edge_list(
        args.graph, directed=args.directed, node_count=args.node_count
    )
    identity = all(str(v) == k for k, v in id_map.items())
    attrs = None
    if args.nodes:
        attrs = load_node_records(args.nodes, graph, id_map=None if identity else id_map)
    save_graph(graph, attrs, args.out, id_map=None if identity else id_map)
    summary = {
        "nodes": graph.node_count,
        "edges": graph.edge_count,
        "directed": graph.directed,
        "out": args.out,
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _rows_to_seed_sets(rows, graph, attrs, cfg, rcfg):
    index = None
    seed_sets = []
    seed_scores = []
    for i, row in enumerate(rows):
        if "seeds" in row:
            seed_sets.append([int(s) for s in row["seeds"]])
            seed_scores.append(None)
            continue
        if "vec" not in row and "text" not in row:
            raise GraphFormatError(
                f"query {i}: need one of 'seeds', 'vec', or 'text'"
            )
        if index is None:
            index = _build_default_index(
                attrs, cfg.raw["index"]["metric"], cfg.raw["index"]["hash_dim"]
            )
        vec = (
            np.asarray(row["vec"], dtype=np.float64)
            if "vec" in row
            else hash_embed(row["text"], index.dim)
        )
        k = int(row.get("k", 5))
        hits = filter_nodes(knn_query(index, vec, k), rcfg.filter)
        seed_sets.append([h.node for h in hits])
        seed_scores.append({h.node: h.score for h in hits})
    return seed_sets, seed_scores


def cmd_retrieve(args) -> int:
    cfg = load_config(args.config)
    rcfg = cfg.retrieval_config()
    graph, attrs, _ = load_graph(args.bundle)
    rows = _read_jsonl(args.queries)
    seed_sets, seed_scores = _rows_to_seed_sets(rows, graph, attrs, cfg, rcfg)
    results = batch_retrieve(
        graph, seed_sets, rcfg, seed_scores=seed_scores, workers=args.threads
    )
    out_rows = []
    for i, res in enumerate(results):
        if isinstance(res, FailedQuery):
            out_rows.append({"query": i, "error": res.error})
        else:
            out_rows.append(
                {
                    "query": i,
                    "method": res.provenance.method,
                    "nodes": res.nodes.tolist(),
                    "edges": res.edges,
                    "scores": res.provenance.scores.tolist(),
                }
            )
    _write_jsonl(args.out, out_rows)
    logger.info("wrote %d subgraph records to %s", len(out_rows), args.out)
    return 0


def cmd_complete(args) -> int:
    graph, attrs, _ = load_graph(args.bundle)
    if attrs is None or attrs.features is None:
        raise GraphFormatError("bundle has no node features to complete")
    masked_attrs, mask = mask_features(attrs, args.missing_rate, args.seed)
    method = CompletionMethod(
        tag=args.method,
        k=args.k,
        alpha=args.alpha,
        hops=args.hops,
        max_nodes=args.max_nodes,
    )
    index = None
    if method.tag not in ("fill0", "neigh_mean", "ppr"):
        if attrs.texts is not None:
            index = build_index(hash_embed_texts(attrs.texts, args.hash_dim))
        else:
            index = build_index(masked_attrs.features)
    completed = complete_features(graph, masked_attrs, mask, method, index)
    report = {
        "method": args.method,
        "missing_rate": args.missing_rate,
        "seed": args.seed,
        "masked_nodes": int(mask.sum()),
        "mse": reconstruction_error(completed, attrs.features, mask, "mse"),
        "cosine": reconstruction_error(completed, attrs.features, mask, "cosine"),
    }
    payload = json.dumps(report, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    print(payload)
    return 0


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    rcfg = cfg.retrieval_config()
    graph, attrs, _ = load_graph(args.bundle)
    index = _build_default_index(
        attrs, cfg.raw["index"]["metric"], cfg.raw["index"]["hash_dim"]
    )
    gen_sec = cfg.raw["generation"]
    prompt_sec = cfg.raw["prompt"]
    pipeline = RagPipeline(
        graph=graph,
        attrs=attrs,
        index=index,
        retrieval_cfg=rcfg,
        template=cfg.template(),
        client=cfg.client(force_mock=args.mock),
        budget=prompt_sec["budget"],
        chars_per_token=prompt_sec["chars_per_token"],
        max_output_tokens=gen_sec["max_output_tokens"],
        temperature=gen_sec["temperature"],
        model=gen_sec["model"],
        serialization_order=prompt_sec["order"],
    )
    rows = _read_jsonl(args.queries)
    out_rows = []
    gen_failures = 0
    scratch = ScratchSpace(graph.node_count)
    for i, row in enumerate(rows):
        if "text" not in row:
            raise GraphFormatError(f"query {i}: missing 'text'")
        vec = (
            np.asarray(row["vec"], dtype=np.float64)
            if "vec" in row
            else hash_embed(row["text"], index.dim)
        )
        try:
            answer = pipeline_answer(
                pipeline, row["text"], vec, int(row.get("k", 5)), scratch=scratch
            )
        except StageError as exc:
            if exc.stage == "generation":
                gen_failures += 1
            out_rows.append({"query": i, "error": str(exc)})
            continue
        out_rows.append(
            {
                "query": i,
                "text": answer.result.text,
                "client": answer.result.client,
                "usage": answer.result.usage,
                "included_nodes": list(answer.bundle.included_nodes),
                "token_estimate": answer.bundle.token_estimate,
                "truncated": answer.bundle.truncated,
                "warnings": list(answer.warnings),
            }
        )
    _write_jsonl(args.out, out_rows)
    logger.info("wrote %d generation records to %s", len(out_rows), args.out)
    if rows and gen_failures == len(rows):
        raise GenerationError("every query failed at the generation stage")
    return 0


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    spec = parse_graph_spec(args.spec)
    counts = [int(c) for c in args.query_counts.split(",") if c]
    if not counts:
        raise UsageError("--query-counts must list at least one count")
    records = run_bench(spec, counts, cfg.bench_config())
    write_bench_csv(records, args.out)
    by_key: dict = {}
    for r in records:
        by_key.setdefault((r.method, r.impl, r.queries), []).append(r.retrieval_seconds)
    for (method, impl, q), times in sorted(by_key.items()):
        print(
            json.dumps(
                {
                    "method": method,
                    "impl": impl,
                    "queries": q,
                    "median_retrieval_seconds": float(np.median(times)),
                },
                sort_keys=True,
            )
        )
    return 0


def _make_parser() -> _Parser:
    parser = _Parser(prog="subrag", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="load, validate, and save a graph bundle")
    p.add_argument("--graph", required=True, help="edge list TSV (src, dst[, weight])")
    p.add_argument("--nodes", help="node records JSONL (id, text, feat, label)")
    p.add_argument(
        "--node-count",
        type=int,
        help="total node count (default: inferred from the edge list)",
    )
    p.add_argument("--directed", action="store_true", help="treat edges as directed")
    p.add_argument("--out", required=True, help="bundle directory to write")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("retrieve", help="batch subgraph retrieval")
    p.add_argument("--bundle", required=True)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--queries", required=True, help="JSONL with seeds/vec/text per line")
    p.add_argument("--out", required=True, help="JSONL output path")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(fn=cmd_retrieve)

    p = sub.add_parser("complete", help="run a feature-completion method")
    p.add_argument("--bundle", required=True)
    p.add_argument("--method", required=True, choices=COMPLETION_TAGS)
    p.add_argument("--missing-rate", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.15)
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--max-nodes", type=int, default=32)
    p.add_argument("--hash-dim", type=int, default=64)
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(fn=cmd_complete)

    p = sub.add_parser("generate", help="full pipeline: retrieve, serialize, generate")
    p.add_argument("--bundle", required=True)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--queries", required=True, help="JSONL with text (and optional vec, k)")
    p.add_argument("--mock", action="store_true", help="force the deterministic mock client")
    p.add_argument("--out", required=True, help="JSONL output path")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("bench", help="naive-vs-optimized retrieval timings")
    p.add_argument("--spec", required=True, help="graph spec, e.g. pa:n=100000,m=5,seed=1")
    p.add_argument("--query-counts", required=True, help="comma-separated counts")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except GenerationError as exc:
        print(f"generation error: {exc}", file=sys.stderr)
        return 3
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3 if exc.stage == "generation" else 2
    except (GraphFormatError, OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
