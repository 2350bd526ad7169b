"""Serialize retrieved subgraphs into budget-bounded prompts.

Token accounting is a bytes/chars-per-token heuristic rather than a model
tokenizer; the divisor is configurable per model profile. All functions are
pure: identical inputs render byte-identical strings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from string import Formatter
from typing import Optional

from .graph import NodeAttributes, Subgraph

__all__ = [
    "PromptTemplate",
    "PromptBundle",
    "estimate_tokens",
    "serialize_subgraph",
    "build_prompt",
    "load_template",
    "DEFAULT_TEMPLATE",
]

DEFAULT_CHARS_PER_TOKEN = 4
MISSING_TEXT = "(no text)"


def estimate_tokens(text: str, chars_per_token: int = DEFAULT_CHARS_PER_TOKEN) -> int:
    """Deterministic token estimate: ceil(utf-8 bytes / chars_per_token)."""
    if chars_per_token < 1:
        raise ValueError("chars_per_token must be >= 1")
    if not text:
        return 0
    return math.ceil(len(text.encode("utf-8")) / chars_per_token)


def _check_placeholders(fmt: str, allowed: set, where: str) -> None:
    for _, name, spec, conv in Formatter().parse(fmt):
        if name is None:
            continue
        if name not in allowed:
            raise ValueError(f"{where}: unresolved placeholder {{{name}}}")
        if spec or conv:
            raise ValueError(
                f"{where}: placeholder {{{name}}} must be bare (no format spec)"
            )


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt skeleton: preamble, one format per node, an optional per-edge
    format, and the query slot. Node placeholders are {id}, {score}, {text};
    edge placeholders are {u}, {v}, {w}; the query slot must use {query}.
    Scores and weights render with four decimals for byte-stable prompts.
    """

    preamble: str
    per_node_format: str
    query_slot: str
    edge_section_format: Optional[str] = None

    def __post_init__(self):
        _check_placeholders(self.preamble, set(), "preamble")
        _check_placeholders(
            self.per_node_format, {"id", "score", "text"}, "per_node_format"
        )
        _check_placeholders(self.query_slot, {"query"}, "query_slot")
        if "{query}" not in self.query_slot:
            raise ValueError("query_slot must contain {query}")
        if self.edge_section_format is not None:
            _check_placeholders(
                self.edge_section_format, {"u", "v", "w"}, "edge_section_format"
            )

    def render_node(self, node: int, score: float, text: Optional[str]) -> str:
        return self.per_node_format.format(
            id=node,
            score=f"{score:.4f}",
            text=text if text is not None else MISSING_TEXT,
        )

    def render_edge(self, u: int, v: int, w: float) -> str:
        assert self.edge_section_format is not None
        return self.edge_section_format.format(u=u, v=v, w=f"{w:.4f}")


DEFAULT_TEMPLATE = PromptTemplate(
    preamble="Context retrieved from the graph:\n",
    per_node_format="[node {id} | relevance {score}] {text}\n",
    query_slot="\nQuestion: {query}\nAnswer:",
    edge_section_format=None,
)


def load_template(path) -> PromptTemplate:
    """Load a template from a JSON file with the documented keys."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {"preamble", "per_node_format", "query_slot", "edge_section_format"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown template key {sorted(unknown)[0]!r}")
    return PromptTemplate(
        preamble=raw["preamble"],
        per_node_format=raw["per_node_format"],
        query_slot=raw["query_slot"],
        edge_section_format=raw.get("edge_section_format"),
    )


@dataclass(frozen=True)
class PromptBundle:
    """A serialized context plus the still-unfilled query slot.

    ``prompt`` is ``context + query_slot``; ``token_estimate`` is the
    estimate of exactly that string and never exceeds the budget it was
    serialized under. ``truncated`` is set iff at least one retrieved node
    was left out for budget reasons.
    """

    prompt: str
    context: str
    query_slot: str
    included_nodes: list
    token_estimate: int
    truncated: bool
    chars_per_token: int


def _serialization_order(sub: Subgraph, order: str) -> list:
    nodes = sub.nodes.tolist()
    scores = sub.provenance.scores
    pos = {u: i for i, u in enumerate(nodes)}
    if order == "node_id":
        ranked = nodes
    elif order == "score_desc":
        ranked = sorted(nodes, key=lambda u: (-float(scores[pos[u]]), u))
    elif order == "bfs_from_seeds":
        adj: dict = {u: [] for u in nodes}
        for u, v in zip(sub.edge_src.tolist(), sub.edge_dst.tolist()):
            adj[u].append(v)
            adj[v].append(u)
        for u in adj:
            adj[u].sort()
        seen = set()
        ranked = []
        for s in sorted(sub.provenance.seeds):
            if s in pos and s not in seen:
                seen.add(s)
                ranked.append(s)
        head = 0
        while head < len(ranked):
            u = ranked[head]
            head += 1
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    ranked.append(v)
        for u in nodes:
            if u not in seen:
                ranked.append(u)
    else:
        raise ValueError(f"unknown serialization order {order!r}")
    seeds = [s for s in sub.provenance.seeds if s in pos]
    seed_set = set(seeds)
    first = [u for u in ranked if u in seed_set]
    rest = [u for u in ranked if u not in seed_set]
    return first + rest


def serialize_subgraph(
    sub: Subgraph,
    attrs: Optional[NodeAttributes],
    template: PromptTemplate,
    budget: int,
    order: str = "score_desc",
    chars_per_token: int = DEFAULT_CHARS_PER_TOKEN,
) -> PromptBundle:
    """Render subgraph nodes into a prompt without exceeding ``budget`` tokens.

    Provenance seeds always come first; remaining nodes follow in the chosen
    order and are appended until the next one would overflow the budget.
    With an edge-aware template, edges between included nodes are appended
    afterwards under the same budget.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    skeleton = template.preamble + template.query_slot
    allowed_bytes = budget * chars_per_token
    used = len(skeleton.encode("utf-8"))
    if used > allowed_bytes:
        raise ValueError(
            f"budget {budget} cannot fit the template skeleton "
            f"({estimate_tokens(skeleton, chars_per_token)} tokens)"
        )
    texts = attrs.texts if attrs is not None and attrs.texts is not None else None
    node_pos = {u: i for i, u in enumerate(sub.nodes.tolist())}
    parts = [template.preamble]
    included: list = []
    truncated = False
    for u in _serialization_order(sub, order):
        text = texts[u] if texts is not None else None
        rendered = template.render_node(
            u, float(sub.provenance.scores[node_pos[u]]), text
        )
        nbytes = len(rendered.encode("utf-8"))
        if used + nbytes > allowed_bytes:
            truncated = True
            break
        used += nbytes
        parts.append(rendered)
        included.append(u)
    if template.edge_section_format is not None and included:
        inc = set(included)
        for i in range(sub.edge_count):
            u, v = int(sub.edge_src[i]), int(sub.edge_dst[i])
            if u not in inc or v not in inc:
                continue
            w = 1.0 if sub.edge_weight is None else float(sub.edge_weight[i])
            rendered = template.render_edge(u, v, w)
            nbytes = len(rendered.encode("utf-8"))
            if used + nbytes > allowed_bytes:
                break
            used += nbytes
            parts.append(rendered)
    context = "".join(parts)
    prompt = context + template.query_slot
    return PromptBundle(
        prompt=prompt,
        context=context,
        query_slot=template.query_slot,
        included_nodes=included,
        token_estimate=estimate_tokens(prompt, chars_per_token),
        truncated=truncated,
        chars_per_token=chars_per_token,
    )


def build_prompt(bundle: PromptBundle, query: str) -> str:
    """Substitute the query into the bundle's slot; pure and idempotent."""
    if not query:
        raise ValueError("query must be nonempty")
    return bundle.context + bundle.query_slot.format(query=query)
