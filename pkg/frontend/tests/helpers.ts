import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import type { DatasetInput } from "../src/index.js";

/** Small deterministic PRNG so instances are reproducible across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomDataset(
  rand: () => number,
  rows: number,
  cols: number,
  classes: number,
): DatasetInput {
  const features = new Float64Array(rows * cols);
  for (let i = 0; i < features.length; i++) {
    features[i] = (rand() * 2 - 1) * 3;
  }
  const labels = new Int32Array(rows);
  for (let i = 0; i < rows; i++) {
    labels[i] = Math.floor(rand() * classes);
  }
  return { features, labels, rows, cols };
}

/** Shortest-round-trip decimal for CSV cells (sign preserved on -0). */
function cell(x: number): string {
  return Object.is(x, -0) ? "-0.0" : String(x);
}

export function writeCsvDataset(path: string, ds: DatasetInput): void {
  const features = ds.features as Float64Array;
  const header = [...Array(ds.cols).keys()].map((j) => `f${j}`).join(",") + ",label";
  const lines = [header];
  for (let i = 0; i < ds.rows; i++) {
    const row: string[] = [];
    for (let j = 0; j < ds.cols; j++) {
      row.push(cell(features[i * ds.cols + j]));
    }
    row.push(String((ds.labels as Int32Array)[i]));
    lines.push(row.join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

/** Run the CLI directly (independent of the binding's own runner). */
export function rawCli(args: string[]): { status: number; stdout: string; stderr: string } {
  const proc = spawnSync("dataval", args, { encoding: "utf-8" });
  if (proc.error) throw proc.error;
  return { status: proc.status ?? -1, stdout: proc.stdout, stderr: proc.stderr };
}

export function cliValues(
  measure: string,
  train: DatasetInput,
  val: DatasetInput,
  k: number,
  aggregation: string,
  extra: string[] = [],
): Float64Array {
  const dir = mkdtempSync(join(tmpdir(), "dataval-ref-"));
  try {
    const trainPath = join(dir, "train.csv");
    const valPath = join(dir, "val.csv");
    const outPath = join(dir, "out.json");
    writeCsvDataset(trainPath, train);
    writeCsvDataset(valPath, val);
    const result = rawCli([
      "value", measure,
      "--train", trainPath,
      "--val", valPath,
      "--k", String(k),
      "--metric", "sqeuclidean",
      "--agg", aggregation,
      "--out", outPath,
      ...extra,
    ]);
    if (result.status !== 0) {
      throw new Error(`reference CLI failed: ${result.stderr}`);
    }
    return Float64Array.from(JSON.parse(readFileSync(outPath, "utf-8")).values);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

export function bits(values: Float64Array): bigint[] {
  return Array.from(new BigUint64Array(values.buffer, values.byteOffset, values.length));
}
