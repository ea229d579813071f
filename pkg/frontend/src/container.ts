/** Pyramid container IO: manifest.json plus raw little-endian f32 blobs. */

import * as fs from "node:fs";
import * as path from "node:path";

import { DimensionError, DtypeError } from "./errors.js";
import { LevelTensors } from "./types.js";

const TENSORS = ["affinity", "semantic", "embedding"] as const;

function channels(tensor: (typeof TENSORS)[number], classes: number, dim: number): number {
  if (tensor === "affinity") return 4;
  if (tensor === "semantic") return classes;
  return dim;
}

/** Check dtypes, per-level lengths and the 2x pyramid relation. */
export function validateLevels(levels: LevelTensors[], classKinds: boolean[]): {
  classes: number;
  dim: number;
} {
  if (levels.length === 0) {
    throw new DimensionError("at least one pyramid level is required");
  }
  const first = levels[0];
  for (const lvl of levels) {
    for (const tensor of TENSORS) {
      if (!(lvl[tensor] instanceof Float32Array)) {
        throw new DtypeError(`${tensor} tensor must be a Float32Array`);
      }
    }
    if (lvl.affinity.length % (4 * lvl.height * lvl.width) !== 0 ||
        lvl.affinity.length !== 4 * lvl.height * lvl.width) {
      throw new DimensionError(
        `affinity length ${lvl.affinity.length} does not match 4x${lvl.height}x${lvl.width}`);
    }
  }
  const pixels0 = first.height * first.width;
  if (first.semantic.length % pixels0 !== 0 || first.embedding.length % pixels0 !== 0) {
    throw new DimensionError("semantic/embedding lengths must be multiples of h*w");
  }
  const classes = first.semantic.length / pixels0;
  const dim = first.embedding.length / pixels0;
  if (classes < 1 || dim < 1) {
    throw new DimensionError("semantic and embedding tensors cannot be empty");
  }
  if (classKinds.length !== classes) {
    throw new DimensionError(
      `class_kinds has ${classKinds.length} entries for ${classes} classes`);
  }
  levels.forEach((lvl, i) => {
    const pixels = lvl.height * lvl.width;
    if (lvl.semantic.length !== classes * pixels) {
      throw new DimensionError(`level ${i + 1} semantic length mismatch`);
    }
    if (lvl.embedding.length !== dim * pixels) {
      throw new DimensionError(`level ${i + 1} embedding length mismatch`);
    }
    if (i > 0) {
      const prev = levels[i - 1];
      const wantH = Math.ceil(prev.height / 2);
      const wantW = Math.ceil(prev.width / 2);
      if (lvl.height !== wantH || lvl.width !== wantW) {
        throw new DimensionError(
          `level ${i + 1} is ${lvl.height}x${lvl.width}, expected ${wantH}x${wantW}`);
      }
    }
  });
  return { classes, dim };
}

/** Write a container directory the CLI can consume. Zero-copy per blob. */
export function writePyramid(levels: LevelTensors[], classKinds: boolean[],
                             dir: string): void {
  const { classes, dim } = validateLevels(levels, classKinds);
  fs.mkdirSync(dir, { recursive: true });
  const manifest = {
    format_version: 1,
    n_levels: levels.length,
    levels: levels.map((lvl) => ({ h: lvl.height, w: lvl.width, c: classes, k: dim })),
    class_kinds: classKinds,
    endianness: "little",
    dtype: "f32",
  };
  fs.writeFileSync(path.join(dir, "manifest.json"), JSON.stringify(manifest) + "\n");
  levels.forEach((lvl, i) => {
    for (const tensor of TENSORS) {
      const arr = lvl[tensor];
      fs.writeFileSync(path.join(dir, `${tensor}_l${i + 1}.bin`),
                       Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength));
    }
  });
}

/** Read a container directory back into typed arrays. */
export function readPyramid(dir: string): { levels: LevelTensors[]; classKinds: boolean[] } {
  const manifest = JSON.parse(
    fs.readFileSync(path.join(dir, "manifest.json"), "utf-8"));
  const levels: LevelTensors[] = [];
  manifest.levels.forEach((spec: { h: number; w: number; c: number; k: number },
                           i: number) => {
    const read = (tensor: (typeof TENSORS)[number]) => {
      const raw = fs.readFileSync(path.join(dir, `${tensor}_l${i + 1}.bin`));
      const want = 4 * channels(tensor, spec.c, spec.k) * spec.h * spec.w;
      if (raw.byteLength !== want) {
        throw new DimensionError(
          `${tensor}_l${i + 1}.bin holds ${raw.byteLength} bytes, expected ${want}`);
      }
      return new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
    };
    levels.push({
      height: spec.h,
      width: spec.w,
      affinity: read("affinity"),
      semantic: read("semantic"),
      embedding: read("embedding"),
    });
  });
  return { levels, classKinds: manifest.class_kinds };
}
