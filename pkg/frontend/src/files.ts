/**
 * File-format shims for the CLI boundary.
 *
 * Datasets cross the boundary in the binary format (magic "DVAL1", u64-LE N
 * and d, row-major f64-LE features, u32-LE labels) so float64 payloads move
 * bit for bit. Value vectors come back as JSON whose numbers carry 17
 * significant digits, which parse back to the exact same doubles.
 */

import { writeFileSync, readFileSync } from "node:fs";

import type { Matrix } from "./views.js";

const MAGIC = "DVAL1";

export function writeBinaryDataset(path: string, features: Matrix, labels: Int32Array): void {
  const { rows, cols, data } = features;
  const buf = Buffer.alloc(MAGIC.length + 16 + rows * cols * 8 + rows * 4);
  let offset = buf.write(MAGIC, 0, "ascii");
  buf.writeBigUInt64LE(BigInt(rows), offset);
  buf.writeBigUInt64LE(BigInt(cols), offset + 8);
  offset += 16;
  for (let i = 0; i < data.length; i++) {
    buf.writeDoubleLE(data[i], offset);
    offset += 8;
  }
  for (let i = 0; i < rows; i++) {
    buf.writeUInt32LE(labels[i], offset);
    offset += 4;
  }
  writeFileSync(path, buf);
}

/** Shortest-round-trip decimal; keeps the sign on negative zero. */
export function floatToken(x: number): string {
  if (Object.is(x, -0)) return "-0.0";
  return String(x);
}

export function writeValuesJson(path: string, values: Float64Array | number[]): void {
  const body = Array.from(values, floatToken).join(", ");
  writeFileSync(path, `{"schema": 1, "n": ${values.length}, "values": [${body}]}\n`);
}

export function writeFlagsCsv(path: string, flags: ArrayLike<number | boolean>): void {
  const lines = ["flag"];
  for (let i = 0; i < flags.length; i++) {
    lines.push(flags[i] ? "1" : "0");
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

export interface ValuesPayload {
  values: Float64Array;
  perValidation?: Float64Array[];
  n: number;
  k: number | null;
  metric: string | null;
  aggregation: string;
  measure: string;
  seed?: number;
}

export function readValuesJson(path: string): ValuesPayload {
  const raw = JSON.parse(readFileSync(path, "utf-8"));
  const payload: ValuesPayload = {
    values: Float64Array.from(raw.values as number[]),
    n: raw.n,
    k: raw.k ?? null,
    metric: raw.metric ?? null,
    aggregation: raw.aggregation,
    measure: raw.measure,
  };
  if (raw.seed !== undefined) payload.seed = raw.seed;
  if (raw.per_validation !== undefined) {
    payload.perValidation = (raw.per_validation as number[][]).map((row) =>
      Float64Array.from(row),
    );
  }
  return payload;
}

export interface CurveFile {
  fractionChecked: Float64Array;
  fractionDetected: Float64Array;
  recallAt: Record<string, number>;
}

export function readCurveCsv(curvePath: string, summaryPath: string): CurveFile {
  const lines = readFileSync(curvePath, "utf-8").trim().split("\n").slice(1);
  const checked = new Float64Array(lines.length);
  const detected = new Float64Array(lines.length);
  lines.forEach((line, i) => {
    const [a, b] = line.split(",");
    checked[i] = Number(a);
    detected[i] = Number(b);
  });
  const summary = JSON.parse(readFileSync(summaryPath, "utf-8"));
  return { fractionChecked: checked, fractionDetected: detected, recallAt: summary.recall_at };
}
