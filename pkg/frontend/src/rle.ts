/** Run-length decoding of segment masks. */

import { DimensionError } from "./errors.js";

export function decodeRle(runs: number[], height: number, width: number): Uint8Array {
  if (runs.length % 2 !== 0) {
    throw new DimensionError("RLE runs must come in (start, length) pairs");
  }
  const mask = new Uint8Array(height * width);
  for (let i = 0; i < runs.length; i += 2) {
    const start = runs[i];
    const length = runs[i + 1];
    if (start < 0 || length < 0 || start + length > mask.length) {
      throw new DimensionError("RLE run exceeds the mask size");
    }
    mask.fill(1, start, start + length);
  }
  return mask;
}
