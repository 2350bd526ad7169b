"""Walkthrough: exact similarity search over node embeddings.

Run with: python demos/02_node_retrieval.py
"""

import numpy as np

from subrag import NodeFilter, batch_knn, build_index, filter_nodes, hash_embed_texts, knn_query

rng = np.random.default_rng(7)

# Embeddings usually come from an external model; here a deterministic
# bag-of-words hashing embedder stands in.
texts = [
    "spectral clustering of citation networks",
    "retrieval augmented generation with graphs",
    "dense subgraph mining at scale",
    "clustering with graph neural networks",
    "token budgets for prompt construction",
    "benchmarking breadth first search kernels",
]
index = build_index(hash_embed_texts(texts, dim=64), metric="cosine")

query = hash_embed_texts(["graph clustering methods"], dim=64)[0]
hits = knn_query(index, query, k=3)
print("top-3 for 'graph clustering methods':")
for h in hits:
    print(f"  node {h.node}  score {h.score:.4f}  {texts[h.node]!r}")

# Dynamic filtering trims candidates before subgraph construction.
print("top_k(2):   ", [h.node for h in filter_nodes(hits, NodeFilter.top_k(2))])
print("threshold:  ", [h.node for h in filter_nodes(hits, NodeFilter.by_threshold(0.2))])

# Batched queries return exactly what per-query calls return, in order.
queries = hash_embed_texts(["prompt budget", "bfs benchmark"], dim=64)
for i, row in enumerate(batch_knn(index, queries, k=2)):
    print(f"batch query {i}: {[(h.node, round(h.score, 4)) for h in row]}")
