/** 16-bit binary PGM decoding (big-endian samples per the format). */

import { DimensionError } from "./errors.js";
import { LabelImage } from "./types.js";

export function decodePgm(raw: Buffer): LabelImage {
  const fields: string[] = [];
  let pos = 0;
  while (fields.length < 4) {
    while (pos < raw.length && /\s/.test(String.fromCharCode(raw[pos]))) pos += 1;
    if (raw[pos] === 0x23) { // comment line
      while (pos < raw.length && raw[pos] !== 0x0a) pos += 1;
      continue;
    }
    const start = pos;
    while (pos < raw.length && !/\s/.test(String.fromCharCode(raw[pos]))) pos += 1;
    fields.push(raw.subarray(start, pos).toString("ascii"));
  }
  if (fields[0] !== "P5" || fields[3] !== "65535") {
    throw new DimensionError("expected a 16-bit binary PGM label image");
  }
  const width = Number(fields[1]);
  const height = Number(fields[2]);
  const payload = raw.subarray(pos + 1);
  if (payload.byteLength !== 2 * width * height) {
    throw new DimensionError(
      `PGM payload has ${payload.byteLength} bytes, expected ${2 * width * height}`);
  }
  const data = new Uint16Array(width * height);
  for (let i = 0; i < data.length; i += 1) {
    data[i] = payload.readUInt16BE(2 * i);
  }
  return { height, width, data };
}
