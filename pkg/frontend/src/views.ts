/**
 * Validated in-memory views over caller-provided numeric buffers.
 *
 * Matrices are contiguous row-major float64 buffers with an explicit
 * (rows, cols) shape; labels are nonnegative integers. Shapes are checked
 * here, before anything is written to disk or dispatched to the CLI.
 */

export interface Matrix {
  data: Float64Array;
  rows: number;
  cols: number;
}

export function asMatrix(
  data: Float64Array | number[],
  rows: number,
  cols: number,
  name: string,
): Matrix {
  if (!Number.isInteger(rows) || !Number.isInteger(cols) || rows < 1 || cols < 1) {
    throw new Error(`${name}: shape (${rows}, ${cols}) must be positive integers`);
  }
  const view = data instanceof Float64Array ? data : Float64Array.from(data);
  if (view.length !== rows * cols) {
    throw new Error(
      `${name}: buffer length ${view.length} does not match shape (${rows}, ${cols})`,
    );
  }
  for (let i = 0; i < view.length; i++) {
    if (!Number.isFinite(view[i])) {
      throw new Error(
        `${name}: non-finite value at row ${Math.floor(i / cols)}, column ${i % cols}`,
      );
    }
  }
  return { data: view, rows, cols };
}

export function asLabels(data: Int32Array | number[], n: number, name: string): Int32Array {
  const view = data instanceof Int32Array ? data : Int32Array.from(data);
  if (view.length !== n) {
    throw new Error(`${name}: expected ${n} labels, got ${view.length}`);
  }
  if (!(data instanceof Int32Array)) {
    for (let i = 0; i < data.length; i++) {
      const v = (data as number[])[i];
      if (!Number.isInteger(v)) {
        throw new Error(`${name}: label at row ${i} is not an integer`);
      }
    }
  }
  for (let i = 0; i < view.length; i++) {
    if (view[i] < 0) {
      throw new Error(`${name}: negative label at row ${i}`);
    }
  }
  return view;
}
