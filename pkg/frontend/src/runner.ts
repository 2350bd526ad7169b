/**
 * Subprocess plumbing: every binding call shells out to the engine's CLI and
 * exchanges data through its documented file formats. Non-zero exits become
 * exceptions carrying the engine's own error message.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

const PYTHON = process.env.SUBRAG_PYTHON ?? "python3";

export class EngineError extends Error {
  readonly exitCode: number;

  constructor(message: string, exitCode: number) {
    super(message);
    this.name = "EngineError";
    this.exitCode = exitCode;
  }
}

export function runCli(args: string[]): string {
  const proc = spawnSync(PYTHON, ["-m", "subrag.cli", ...args], {
    encoding: "utf-8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (proc.error) {
    throw new EngineError(`failed to launch engine CLI: ${proc.error.message}`, -1);
  }
  if (proc.status !== 0) {
    const detail = (proc.stderr ?? "").trim() || (proc.stdout ?? "").trim();
    throw new EngineError(detail || `engine exited with code ${proc.status}`, proc.status ?? -1);
  }
  return proc.stdout ?? "";
}

export function makeWorkDir(label: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), `subrag-${label}-`));
}

export function writeJsonl(file: string, rows: unknown[]): void {
  fs.writeFileSync(file, rows.map((r) => JSON.stringify(r)).join("\n") + "\n");
}

export function readJsonl(file: string): any[] {
  return fs
    .readFileSync(file, "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line));
}
