/**
 * Graph handle: builds a validated bundle directory from a native edge list
 * and answers simple inspection queries by reading the bundle back. All
 * values cross the boundary by copy; releasing the handle deletes the bundle
 * and makes further use throw (never crash).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { EngineError, makeWorkDir, readJsonl, runCli, writeJsonl } from "./runner.js";

export type Edge = [number, number] | [number, number, number];

export interface RetrievalOptions {
  method?: "bfs" | "steiner" | "dense";
  hops?: number;
  fanout_cap?: number | null;
  max_nodes?: number | null;
}

export interface SubgraphRecord {
  query: number;
  method?: string;
  nodes?: number[];
  edges?: number[][];
  scores?: number[];
  error?: string;
}

export interface NodePayload {
  texts?: string[];
  feats?: number[][];
  labels?: number[];
}

export class Graph {
  private workDir: string | null;
  readonly nodeCount: number;
  readonly edgeCount: number;

  constructor(edges: Edge[], nodeCount: number, payload: NodePayload = {}) {
    this.workDir = makeWorkDir("graph");
    const tsv = edges
      .map((e) => (e.length === 3 ? `${e[0]}\t${e[1]}\t${e[2]}` : `${e[0]}\t${e[1]}`))
      .join("\n");
    const edgePath = path.join(this.workDir, "edges.tsv");
    fs.writeFileSync(edgePath, tsv.length ? tsv + "\n" : "");
    const nodesPath = path.join(this.workDir, "nodes.jsonl");
    writeJsonl(
      nodesPath,
      Array.from({ length: nodeCount }, (_, i) => {
        const row: Record<string, unknown> = { id: i };
        if (payload.texts?.[i] !== undefined) row.text = payload.texts[i];
        if (payload.feats?.[i] !== undefined) row.feat = payload.feats[i];
        if (payload.labels?.[i] !== undefined) row.label = payload.labels[i];
        return row;
      }),
    );
    const summary = JSON.parse(
      runCli([
        "build",
        "--graph",
        edgePath,
        "--nodes",
        nodesPath,
        "--node-count",
        String(nodeCount),
        "--out",
        this.bundleDirUnchecked(),
      ]),
    );
    this.nodeCount = summary.nodes;
    this.edgeCount = summary.edges;
    if (this.nodeCount !== nodeCount) {
      throw new EngineError(
        `engine reported ${this.nodeCount} nodes, expected ${nodeCount}`,
        -1,
      );
    }
  }

  private bundleDirUnchecked(): string {
    return path.join(this.workDir as string, "bundle");
  }

  /** Bundle directory backing this handle; throws after release(). */
  bundleDir(): string {
    if (this.workDir === null) {
      throw new Error("graph handle was released");
    }
    return this.bundleDirUnchecked();
  }

  /** Per-node degree list, recomputed from the persisted edge list. */
  degrees(): number[] {
    const deg = new Array<number>(this.nodeCount).fill(0);
    const tsv = fs.readFileSync(path.join(this.bundleDir(), "graph.tsv"), "utf-8");
    for (const line of tsv.split("\n")) {
      if (!line || line.startsWith("#")) continue;
      const [u, v] = line.split("\t").map(Number);
      deg[u] += 1;
      deg[v] += 1;
    }
    return deg;
  }

  /** Delete the backing bundle; the handle becomes unusable but safe. */
  release(): void {
    if (this.workDir !== null) {
      fs.rmSync(this.workDir, { recursive: true, force: true });
      this.workDir = null;
    }
  }
}

/**
 * Batched subgraph retrieval: one record per seed set, value-equal to the
 * engine's own CLI output for identical inputs.
 */
export function retrieve_batch(
  graph: Graph,
  seedSets: number[][],
  options: RetrievalOptions = {},
): SubgraphRecord[] {
  const bundle = graph.bundleDir();
  const work = makeWorkDir("retrieve");
  try {
    const queries = path.join(work, "queries.jsonl");
    writeJsonl(
      queries,
      seedSets.map((seeds) => ({ seeds })),
    );
    const config = path.join(work, "config.json");
    fs.writeFileSync(config, JSON.stringify({ retrieval: { ...options } }));
    const out = path.join(work, "out.jsonl");
    runCli([
      "retrieve",
      "--bundle",
      bundle,
      "--config",
      config,
      "--queries",
      queries,
      "--out",
      out,
    ]);
    return readJsonl(out) as SubgraphRecord[];
  } finally {
    fs.rmSync(work, { recursive: true, force: true });
  }
}
