/**
 * Subprocess runner for the dataval CLI.
 *
 * The binding talks to the core exclusively through this boundary: binary
 * dataset files in, JSON/CSV result files out. Set DATAVAL_BIN to point at
 * a specific executable; otherwise the `dataval` console script is used,
 * falling back to `python3 -m dataval`.
 */

import { spawnSync } from "node:child_process";

let resolved: string[] | null = null;
let cachedVersion: string | null = null;

function candidateCommands(): string[][] {
  const fromEnv = process.env.DATAVAL_BIN;
  if (fromEnv) return [fromEnv.split(" ")];
  return [["dataval"], ["python3", "-m", "dataval"]];
}

function resolveCommand(): string[] {
  if (resolved) return resolved;
  for (const candidate of candidateCommands()) {
    const probe = spawnSync(candidate[0], [...candidate.slice(1), "--version"], {
      encoding: "utf-8",
    });
    if (probe.status === 0) {
      resolved = candidate;
      cachedVersion = probe.stdout.trim();
      return candidate;
    }
  }
  throw new Error(
    "dataval CLI not found; install the core package or set DATAVAL_BIN",
  );
}

export function runCli(args: string[]): void {
  const command = resolveCommand();
  const proc = spawnSync(command[0], [...command.slice(1), ...args], {
    encoding: "utf-8",
  });
  if (proc.error) {
    throw new Error(`failed to launch dataval: ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    const line = (proc.stderr || proc.stdout || "").trim().split("\n").pop();
    throw new Error(`dataval exited with code ${proc.status}: ${line}`);
  }
}

/** Version string of the core CLI; bindings inherit it verbatim. */
export function coreVersion(): string {
  resolveCommand();
  return cachedVersion as string;
}
