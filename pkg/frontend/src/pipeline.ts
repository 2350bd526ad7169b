/**
 * Pipeline handle: full retrieve-serialize-generate runs against a Graph's
 * bundle, always with the engine's deterministic mock client (the HTTP
 * client is deliberately not bound).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import type { Graph, RetrievalOptions } from "./graph.js";
import { makeWorkDir, readJsonl, runCli, writeJsonl } from "./runner.js";

export interface PipelineOptions {
  retrieval?: RetrievalOptions;
  budget?: number;
  max_output_tokens?: number;
}

export interface AnswerRecord {
  query: number;
  text?: string;
  client?: string;
  usage?: { prompt_tokens: number; output_tokens: number };
  included_nodes?: number[];
  token_estimate?: number;
  truncated?: boolean;
  warnings?: string[];
  error?: string;
}

export class Pipeline {
  private graph: Graph;
  private configPath: string | null;
  private workDir: string;

  constructor(graph: Graph, options: PipelineOptions = {}) {
    this.graph = graph;
    this.workDir = makeWorkDir("pipeline");
    const config: Record<string, unknown> = {};
    if (options.retrieval) {
      config.retrieval = options.retrieval;
    }
    const prompt: Record<string, unknown> = {};
    if (options.budget !== undefined) prompt.budget = options.budget;
    if (Object.keys(prompt).length) config.prompt = prompt;
    const generation: Record<string, unknown> = {};
    if (options.max_output_tokens !== undefined) {
      generation.max_output_tokens = options.max_output_tokens;
    }
    if (Object.keys(generation).length) config.generation = generation;
    this.configPath = path.join(this.workDir, "config.json");
    fs.writeFileSync(this.configPath, JSON.stringify(config));
  }

  private config(): string {
    if (this.configPath === null) {
      throw new Error("pipeline handle was released");
    }
    return this.configPath;
  }

  /** Answer one query with the deterministic mock client. */
  answer(queryText: string, queryVec?: number[], k = 5): AnswerRecord {
    return this.answerBatch([{ text: queryText, vec: queryVec, k }])[0];
  }

  /** Answer many queries; one record per query, in order. */
  answerBatch(
    queries: Array<{ text: string; vec?: number[]; k?: number }>,
  ): AnswerRecord[] {
    const config = this.config();
    const bundle = this.graph.bundleDir();
    const work = makeWorkDir("answers");
    try {
      const queryPath = path.join(work, "queries.jsonl");
      writeJsonl(
        queryPath,
        queries.map((q) => {
          const row: Record<string, unknown> = { text: q.text };
          if (q.vec !== undefined) row.vec = q.vec;
          if (q.k !== undefined) row.k = q.k;
          return row;
        }),
      );
      const out = path.join(work, "out.jsonl");
      runCli([
        "generate",
        "--bundle",
        bundle,
        "--config",
        config,
        "--queries",
        queryPath,
        "--mock",
        "--out",
        out,
      ]);
      return readJsonl(out) as AnswerRecord[];
    } finally {
      fs.rmSync(work, { recursive: true, force: true });
    }
  }

  /** Drop the handle's config; further use throws, never crashes. */
  release(): void {
    if (this.configPath !== null) {
      fs.rmSync(this.workDir, { recursive: true, force: true });
      this.configPath = null;
    }
  }
}
