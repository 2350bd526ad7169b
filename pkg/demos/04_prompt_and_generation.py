"""Walkthrough: serializing subgraphs under token budgets and generating.

Run with: python demos/04_prompt_and_generation.py
"""

from subrag import (
    DEFAULT_TEMPLATE,
    MockClient,
    NodeAttributes,
    RagPipeline,
    RetrievalConfig,
    bfs_expand,
    build_graph,
    build_index,
    estimate_tokens,
    hash_embed,
    hash_embed_texts,
    pipeline_answer,
    serialize_subgraph,
)

texts = [
    "Graph engines index nodes for fast access.",
    "Node retrieval selects seeds by embedding similarity.",
    "Subgraph construction captures local structure around seeds.",
    "Serialization turns a subgraph into a prompt under a token budget.",
    "A generation client turns the prompt into an answer.",
]
g = build_graph([(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)], node_count=5)
attrs = NodeAttributes(node_count=5, texts=texts)

# Serialize a 2-hop neighborhood under increasingly tight budgets.
sub = bfs_expand(g, [0], hops=2)
for budget in (200, 40, 20):
    bundle = serialize_subgraph(sub, attrs, DEFAULT_TEMPLATE, budget=budget)
    print(
        f"budget {budget:4d}: {len(bundle.included_nodes)} nodes included, "
        f"estimate {bundle.token_estimate}, truncated={bundle.truncated}"
    )

# The full pipeline: retrieve seeds, build a subgraph, serialize, generate.
pipe = RagPipeline(
    graph=g,
    attrs=attrs,
    index=build_index(hash_embed_texts(texts, dim=32)),
    retrieval_cfg=RetrievalConfig(method="bfs", hops=1),
    client=MockClient(),
    budget=120,
)
question = "How does a query become an answer?"
answer = pipeline_answer(pipe, question, hash_embed(question, 32), k=2)
print(f"\nincluded nodes: {answer.bundle.included_nodes}")
print(f"prompt tokens (estimate): {estimate_tokens(answer.bundle.prompt)}")
print(f"mock answer: {answer.result.text[:90]}...")
