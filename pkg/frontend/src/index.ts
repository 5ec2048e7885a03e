/**
 * In-memory bindings for the dataval data-valuation engine.
 *
 * Four functions mirror the core signatures over typed arrays: Shapley and
 * leave-one-out values under the KNN utility, the Monte Carlo permutation
 * estimator, and the detection curve. Inputs are validated in process, then
 * shipped to the CLI through the bit-exact binary dataset format; results
 * parse back from 17-significant-digit JSON, so values are bit-identical to
 * what the CLI writes.
 */

import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { coreVersion, runCli } from "./cli.js";
import {
  readCurveCsv,
  readValuesJson,
  writeBinaryDataset,
  writeFlagsCsv,
  writeValuesJson,
  type CurveFile,
  type ValuesPayload,
} from "./files.js";
import { asLabels, asMatrix, type Matrix } from "./views.js";

export type { Matrix } from "./views.js";
export type { ValuesPayload, CurveFile } from "./files.js";

export type MetricName = "sqeuclidean" | "cosine";
export type AggregationName = "mean" | "max" | "per-val";

export interface DatasetInput {
  features: Float64Array | number[];
  labels: Int32Array | number[];
  rows: number;
  cols: number;
}

export interface KnnOptions {
  k: number;
  metric?: MetricName;
  aggregation?: AggregationName;
  threads?: number;
}

export interface McOptions {
  k: number;
  metric?: MetricName;
  permutations: number;
  seed: number;
  truncationTolerance?: number;
}

interface BoundDataset {
  features: Matrix;
  labels: Int32Array;
}

function bind(input: DatasetInput, name: string): BoundDataset {
  const features = asMatrix(input.features, input.rows, input.cols, name);
  const labels = asLabels(input.labels, input.rows, `${name} labels`);
  return { features, labels };
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "dataval-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

function checkK(k: number): void {
  if (!Number.isInteger(k) || k < 1) {
    throw new Error(`k must be a positive integer, got ${k}`);
  }
}

function valueCommand(
  measure: string,
  train: DatasetInput,
  val: DatasetInput,
  k: number,
  metric: MetricName,
  aggregation: AggregationName,
  extra: string[] = [],
): ValuesPayload {
  const boundTrain = bind(train, "train");
  const boundVal = bind(val, "val");
  if (boundTrain.features.cols !== boundVal.features.cols) {
    throw new Error(
      `feature width mismatch: train has ${boundTrain.features.cols} columns, ` +
        `val has ${boundVal.features.cols}`,
    );
  }
  checkK(k);
  return withTempDir((dir) => {
    const trainPath = join(dir, "train.bin");
    const valPath = join(dir, "val.bin");
    const outPath = join(dir, "out.json");
    writeBinaryDataset(trainPath, boundTrain.features, boundTrain.labels);
    writeBinaryDataset(valPath, boundVal.features, boundVal.labels);
    runCli([
      "value", measure,
      "--train", trainPath,
      "--val", valPath,
      "--k", String(k),
      "--metric", metric,
      "--agg", aggregation,
      "--out", outPath,
      ...extra,
    ]);
    return readValuesJson(outPath);
  });
}

/** Exact Shapley values of every training point under the KNN utility. */
export function knnShapley(
  train: DatasetInput,
  val: DatasetInput,
  options: KnnOptions,
): ValuesPayload {
  const extra = options.threads ? ["--threads", String(options.threads)] : [];
  return valueCommand(
    "knn-shapley", train, val, options.k,
    options.metric ?? "sqeuclidean", options.aggregation ?? "mean", extra,
  );
}

/** Exact leave-one-out values of every training point under the KNN utility. */
export function knnLoo(
  train: DatasetInput,
  val: DatasetInput,
  options: KnnOptions,
): ValuesPayload {
  const extra = options.threads ? ["--threads", String(options.threads)] : [];
  return valueCommand(
    "knn-loo", train, val, options.k,
    options.metric ?? "sqeuclidean", options.aggregation ?? "mean", extra,
  );
}

/** Permutation-sampling Shapley estimate; deterministic for a given seed. */
export function mcShapley(
  train: DatasetInput,
  val: DatasetInput,
  options: McOptions,
): ValuesPayload {
  if (!Number.isInteger(options.permutations) || options.permutations < 1) {
    throw new Error(`permutations must be a positive integer, got ${options.permutations}`);
  }
  if (!Number.isInteger(options.seed) || options.seed < 0) {
    throw new Error(`seed must be a nonnegative integer, got ${options.seed}`);
  }
  const extra = [
    "--permutations", String(options.permutations),
    "--seed", String(options.seed),
  ];
  if (options.truncationTolerance !== undefined) {
    extra.push("--truncation", String(options.truncationTolerance));
  }
  return valueCommand(
    "mc-shapley", train, val, options.k,
    options.metric ?? "sqeuclidean", "mean", extra,
  );
}

/**
 * Prefix recall of flagged points along the ascending-value ranking.
 * Needs at least one flagged and one clean point.
 */
export function detectionCurve(
  values: Float64Array | number[],
  flags: ArrayLike<number | boolean>,
): CurveFile {
  if (values.length !== flags.length) {
    throw new Error(
      `values length ${values.length} does not match flags length ${flags.length}`,
    );
  }
  return withTempDir((dir) => {
    const valuesPath = join(dir, "values.json");
    const flagsPath = join(dir, "flags.csv");
    const outPath = join(dir, "curve.csv");
    writeValuesJson(valuesPath, values);
    writeFlagsCsv(flagsPath, flags);
    runCli([
      "apps", "detect",
      "--values", valuesPath,
      "--flags", flagsPath,
      "--out", outPath,
    ]);
    return readCurveCsv(outPath, `${outPath}.summary.json`);
  });
}

/** Version of the core engine; the binding has no version of its own. */
export function version(): string {
  return coreVersion();
}
