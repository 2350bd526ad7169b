"""Walkthrough: building, inspecting, and persisting attributed graphs.

Run with: python demos/01_graph_basics.py
"""

import tempfile
from pathlib import Path

import numpy as np

from subrag import (
    NodeAttributes,
    build_graph,
    induced_subgraph,
    load_graph,
    neighbors,
    save_graph,
    validate,
)

# A small citation-style graph: 6 papers, undirected references.
edges = [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5, 2.5)]
g = build_graph(edges, node_count=6)
validate(g)

print(f"nodes: {g.node_count}, edges: {g.edge_count}")
print(f"degrees: {g.degrees().tolist()}")
print(f"neighbors of 2: {neighbors(g, 2).tolist()}")

# Induced subgraphs keep exactly the edges among the chosen nodes.
sub = induced_subgraph(g, {0, 1, 2, 3})
print(f"induced on {{0,1,2,3}}: {sub.edge_count} edges, density {sub.density:.2f}")

# Attach texts and features, then round-trip through a bundle directory.
attrs = NodeAttributes(
    node_count=6,
    texts=[f"paper {i}: notes on topic {i % 2}" for i in range(6)],
    features=np.eye(6)[:, :4],
)
with tempfile.TemporaryDirectory() as tmp:
    bundle = Path(tmp) / "bundle"
    save_graph(g, attrs, bundle)
    g2, attrs2, meta = load_graph(bundle)
    print(f"round-trip: {g2.node_count} nodes, texts[3] = {attrs2.texts[3]!r}")
    print(f"bundle files: {sorted(p.name for p in bundle.iterdir())}")
