"""End-to-end pipeline: index -> retrieve nodes -> build subgraph -> serialize
-> generate, plus dataset loading, feature masking, and functional composition.

Query embeddings are caller-supplied vectors; the engine ships no embedding
model. ``hash_embed`` provides a deterministic bag-of-words stand-in for tests
and demos only.
"""

from __future__ import annotations

import os
import re
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .generation import GenerationRequest, GenerationResult, GenerationError, generate
from .graph import Graph, NodeAttributes, Subgraph
from .index import EmbeddingIndex, batch_knn, knn_query
from .index import _check_query
from .io import load_graph
from .prompt import (
    DEFAULT_CHARS_PER_TOKEN,
    DEFAULT_TEMPLATE,
    PromptBundle,
    PromptTemplate,
    build_prompt,
    serialize_subgraph,
)
from .retrieval import (
    FailedQuery,
    RetrievalConfig,
    ScratchSpace,
    _dispatch_query,
    batch_retrieve,
    filter_nodes,
)

__all__ = [
    "RagPipeline",
    "PipelineAnswer",
    "StageError",
    "Dataset",
    "pipeline_answer",
    "pipeline_answer_batch",
    "compose",
    "identity",
    "stage",
    "load_dataset",
    "mask_features",
    "hash_embed",
    "hash_embed_texts",
]


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names which one."""

    def __init__(self, stage_name: str, message: str):
        super().__init__(f"[{stage_name}] {message}")
        self.stage = stage_name


@dataclass(frozen=True)
class RagPipeline:
    """Immutable bundle of everything one query needs to run end to end."""

    graph: Graph
    attrs: Optional[NodeAttributes]
    index: EmbeddingIndex
    retrieval_cfg: RetrievalConfig
    template: PromptTemplate = DEFAULT_TEMPLATE
    client: object = None
    budget: int = 1024
    chars_per_token: int = DEFAULT_CHARS_PER_TOKEN
    max_output_tokens: int = 256
    temperature: float = 0.0
    model: str = "default"
    serialization_order: str = "score_desc"

    def __post_init__(self):
        if self.index.size != self.graph.node_count:
            raise ValueError(
                f"index has {self.index.size} rows, graph has "
                f"{self.graph.node_count} nodes"
            )
        if self.client is None:
            raise ValueError("pipeline needs a generation client")


@dataclass(frozen=True)
class PipelineAnswer:
    result: GenerationResult
    bundle: PromptBundle
    subgraph: Subgraph
    warnings: tuple = ()


def _retrieve_stage(p: RagPipeline, query_vec, k: int, scratch):
    warnings = []
    k_eff = min(k, p.index.size)
    if k_eff < k:
        warnings.append(f"k clamped from {k} to {k_eff} (index size)")
    try:
        hits = knn_query(p.index, query_vec, k_eff)
    except ValueError as exc:
        raise StageError("node_retrieval", str(exc)) from exc
    hits = filter_nodes(hits, p.retrieval_cfg.filter)
    seeds = [h.node for h in hits]
    seed_scores = {h.node: h.score for h in hits}
    try:
        sub = _dispatch_query(p.graph, seeds, p.retrieval_cfg, seed_scores, scratch)
    except (ValueError, KeyError) as exc:
        raise StageError("graph_retrieval", str(exc)) from exc
    return sub, warnings


def _answer_from_subgraph(p: RagPipeline, sub: Subgraph, query_text: str, warnings):
    try:
        bundle = serialize_subgraph(
            sub,
            p.attrs,
            p.template,
            p.budget,
            order=p.serialization_order,
            chars_per_token=p.chars_per_token,
        )
    except ValueError as exc:
        raise StageError("serialization", str(exc)) from exc
    try:
        prompt = build_prompt(bundle, query_text)
        result = generate(
            p.client,
            GenerationRequest(
                prompt=prompt,
                max_output_tokens=p.max_output_tokens,
                temperature=p.temperature,
                model=p.model,
            ),
        )
    except (ValueError, GenerationError) as exc:
        raise StageError("generation", str(exc)) from exc
    return PipelineAnswer(
        result=result, bundle=bundle, subgraph=sub, warnings=tuple(warnings)
    )


def pipeline_answer(
    p: RagPipeline,
    query_text: str,
    query_vec,
    k: int,
    scratch: Optional[ScratchSpace] = None,
) -> PipelineAnswer:
    """Run all five stages for one query; intermediates are returned too.

    ``k`` is clamped to the index size with a recorded warning. Stage
    failures raise StageError tagged with the stage name.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scratch = scratch or ScratchSpace(p.graph.node_count)
    sub, warnings = _retrieve_stage(p, query_vec, k, scratch)
    return _answer_from_subgraph(p, sub, query_text, warnings)


def pipeline_answer_batch(
    p: RagPipeline,
    queries: Sequence,
    k: int,
    workers: int = 1,
) -> list:
    """Answer many (text, vector) queries; element i equals the single call.

    Node retrieval and graph retrieval run batched internally (one similarity
    pass and one kernel batch per worker chunk); serialization and generation
    follow per query. Failing queries yield FailedQuery entries with the same
    stage-tagged message the sequential call raises; the rest of the batch
    still completes.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    queries = list(queries)
    if not queries:
        return []
    results: list = [None] * len(queries)
    k_eff = min(k, p.index.size)
    clamp_warning = (
        [f"k clamped from {k} to {k_eff} (index size)"] if k_eff < k else []
    )

    def run(indices, scratch):
        valid = []
        vecs = []
        for i in indices:
            vec = queries[i][1]
            try:
                vecs.append(_check_query(p.index, vec))
                valid.append(i)
            except ValueError as exc:
                results[i] = FailedQuery(index=i, error=f"[node_retrieval] {exc}")
        if not valid:
            return
        hit_lists = batch_knn(p.index, np.stack(vecs), k_eff)
        seed_sets = []
        seed_scores = []
        for hits in hit_lists:
            hits = filter_nodes(hits, p.retrieval_cfg.filter)
            seed_sets.append([h.node for h in hits])
            seed_scores.append({h.node: h.score for h in hits})
        subs = batch_retrieve(
            p.graph, seed_sets, p.retrieval_cfg, seed_scores=seed_scores, scratch=scratch
        )
        for i, sub in zip(valid, subs):
            if isinstance(sub, FailedQuery):
                results[i] = FailedQuery(index=i, error=f"[graph_retrieval] {sub.error}")
                continue
            try:
                results[i] = _answer_from_subgraph(
                    p, sub, queries[i][0], list(clamp_warning)
                )
            except StageError as exc:
                results[i] = FailedQuery(index=i, error=str(exc))

    if workers <= 1 or len(queries) == 1:
        run(range(len(queries)), ScratchSpace(p.graph.node_count))
        return results
    chunks = np.array_split(np.arange(len(queries)), min(workers, len(queries)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(run, chunk.tolist(), ScratchSpace(p.graph.node_count))
            for chunk in chunks
            if chunk.size
        ]
        for f in futures:
            f.result()
    return results


# ---------------------------------------------------------------------------
# Functional composition
# ---------------------------------------------------------------------------


def identity(x):
    return x


identity.input_kind = None
identity.output_kind = None


def stage(input_kind: Optional[str], output_kind: Optional[str]):
    """Declare a function's stage contract for compose-time checking."""

    def deco(fn):
        fn.input_kind = input_kind
        fn.output_kind = output_kind
        return fn

    return deco


def compose(*stage_fns):
    """Left-to-right function composition: compose(f, g)(x) == g(f(x)).

    Adjacent stages with declared contracts must match; mismatches raise at
    composition time, not call time. Composing nothing gives the identity.
    """
    fns = list(stage_fns)
    if not fns:
        return identity
    for a, b in zip(fns, fns[1:]):
        out_kind = getattr(a, "output_kind", None)
        in_kind = getattr(b, "input_kind", None)
        if out_kind is not None and in_kind is not None and out_kind != in_kind:
            raise ValueError(
                f"stage contract mismatch: {getattr(a, '__name__', a)} yields "
                f"{out_kind!r} but {getattr(b, '__name__', b)} expects {in_kind!r}"
            )

    def composed(x):
        for f in fns:
            x = f(x)
        return x

    composed.input_kind = getattr(fns[0], "input_kind", None)
    composed.output_kind = getattr(fns[-1], "output_kind", None)
    return composed


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """A graph with attributes and disjoint train/valid/test node splits."""

    name: str
    graph: Graph
    attrs: Optional[NodeAttributes]
    splits: dict = field(default_factory=dict)

    def __post_init__(self):
        seen: set = set()
        for part, ids in self.splits.items():
            arr = np.asarray(ids)
            if arr.size:
                if arr.min() < 0 or arr.max() >= self.graph.node_count:
                    raise ValueError(f"split {part!r} has node ids out of range")
            ids_set = set(arr.tolist())
            if seen & ids_set:
                raise ValueError(f"split {part!r} overlaps another split")
            seen |= ids_set


def _default_splits(n: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(0.8 * n)
    n_valid = int(0.1 * n)
    return {
        "train": np.sort(perm[:n_train]),
        "valid": np.sort(perm[n_train : n_train + n_valid]),
        "test": np.sort(perm[n_train + n_valid :]),
    }


def load_dataset(name_or_path: str, feat_dim: Optional[int] = None) -> Dataset:
    """Load a saved bundle directory or generate a synthetic dataset.

    Synthetic specs look like ``er:n=100,p=0.1,seed=7`` or
    ``pa:n=100,m=3,seed=7``. Synthetic nodes get placeholder texts and, when
    ``feat_dim`` is given, seeded standard-normal features. Splits are a
    seeded 80/10/10 partition either way.
    """
    name = str(name_or_path)
    if not name.startswith(("er:", "pa:")):
        if not os.path.isdir(name):
            raise ValueError(
                f"{name!r} is neither a bundle directory nor a "
                "synthetic spec (er:... / pa:...)"
            )
        graph, attrs, _ = load_graph(name)
        return Dataset(
            name=os.path.basename(os.path.normpath(name)),
            graph=graph,
            attrs=attrs,
            splits=_default_splits(graph.node_count, seed=0),
        )
    from .bench import gen_graph, parse_graph_spec

    spec = parse_graph_spec(name)
    graph = gen_graph(spec)
    n = spec.n
    rng = np.random.default_rng(spec.seed + 1)
    features = None
    if feat_dim is not None:
        features = rng.standard_normal((n, feat_dim))
    attrs = NodeAttributes(
        node_count=n,
        texts=[f"node {i} of {name}" for i in range(n)],
        features=features,
    )
    return Dataset(
        name=name,
        graph=graph,
        attrs=attrs,
        splits=_default_splits(n, seed=spec.seed),
    )


def mask_features(attrs: NodeAttributes, missing_rate: float, rng_seed: int):
    """Zero out a seeded random subset of feature rows.

    Exactly ``round(missing_rate * node_count)`` rows are masked; the same
    seed always masks the same rows. Returns ``(masked_attrs, mask)`` where
    ``mask[u]`` is True for zeroed rows.
    """
    if not 0.0 <= missing_rate <= 1.0:
        raise ValueError("missing_rate must lie in [0, 1]")
    if attrs.features is None:
        raise ValueError("attributes carry no features to mask")
    n = attrs.node_count
    k = int(round(missing_rate * n))
    rng = np.random.default_rng(rng_seed)
    chosen = np.sort(rng.permutation(n)[:k])
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    masked = attrs.features.copy()
    masked[mask] = 0.0
    return (
        NodeAttributes(
            node_count=n, texts=attrs.texts, features=masked, labels=attrs.labels
        ),
        mask,
    )


# ---------------------------------------------------------------------------
# Test/demo embedder
# ---------------------------------------------------------------------------


def hash_embed(text: str, dim: int = 64) -> np.ndarray:
    """Deterministic bag-of-words hashing embedding (unit norm)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    vec = np.zeros(dim, dtype=np.float64)
    for tok in re.findall(r"[a-z0-9]+", text.lower()):
        vec[zlib.crc32(tok.encode("utf-8")) % dim] += 1.0
    norm = float(np.sqrt(vec @ vec))
    return vec / norm if norm else vec


def hash_embed_texts(texts: Iterable[Optional[str]], dim: int = 64) -> np.ndarray:
    rows = [hash_embed(t if t is not None else "", dim) for t in texts]
    return np.asarray(rows, dtype=np.float64)
