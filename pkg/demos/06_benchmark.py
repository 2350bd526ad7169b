"""Walkthrough: timing naive per-query retrieval against the batched kernels.

A desk-scale version of the full benchmark (the acceptance suite runs the
100,000-node one). Writes a CSV consumable by any plotting tool.

Run with: python demos/06_benchmark.py
"""

import tempfile
from pathlib import Path

import numpy as np

from subrag import BenchConfig, SyntheticGraphSpec, run_bench
from subrag.bench import write_bench_csv

spec = SyntheticGraphSpec(kind="preferential_attachment", n=20_000, param=5, seed=1)
cfg = BenchConfig(reps=3, seed=0, learning_seconds=0.8)
records = run_bench(spec, query_counts=[100, 1000], cfg=cfg)

med = {}
for r in records:
    med.setdefault((r.method, r.impl, r.queries), []).append(r.retrieval_seconds)
print(f"{'method':8s} {'queries':>8s} {'naive s':>9s} {'batched s':>10s} {'speedup':>8s}")
for method in cfg.methods:
    for q in (100, 1000):
        naive = float(np.median(med[(method, "naive", q)]))
        opt = float(np.median(med[(method, "optimized", q)]))
        print(f"{method:8s} {q:8d} {naive:9.4f} {opt:10.4f} {naive / opt:7.1f}x")

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "bench.csv"
    write_bench_csv(records, out)
    print(f"\nCSV head:\n" + "\n".join(out.read_text().splitlines()[:4]))
