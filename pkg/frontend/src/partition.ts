/** The partition entry point: marshal tensors, delegate to the CLI, read back.

No algorithm lives here; the core engine does all partitioning work in a
subprocess, so concurrent calls on distinct inputs are naturally safe.
*/

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { writePyramid } from "./container.js";
import { decodePgm } from "./pgm.js";
import { runCli } from "./runner.js";
import { LabelImage, LevelTensors, PartitionConfig, PartitionResult,
         SegmentRecord } from "./types.js";

/**
 * Renumber instance ids 1..K in raster order of each id's first pixel.
 * The CLI already emits canonical ids; applying it here makes the
 * cross-surface equality exact rather than up to permutation.
 */
export function canonicalizeLabels(labels: LabelImage): Map<number, number> {
  const remap = new Map<number, number>();
  const { data } = labels;
  for (let i = 0; i < data.length; i += 1) {
    const id = data[i];
    if (id > 0 && !remap.has(id)) {
      remap.set(id, remap.size + 1);
    }
  }
  for (let i = 0; i < data.length; i += 1) {
    const id = data[i];
    if (id > 0) {
      data[i] = remap.get(id)!;
    }
  }
  return remap;
}

export function partition(levels: LevelTensors[], classKinds: boolean[],
                          config: PartitionConfig = {}): PartitionResult {
  const work = fs.mkdtempSync(path.join(os.tmpdir(), "affcut-"));
  try {
    const containerDir = path.join(work, "pyramid");
    writePyramid(levels, classKinds, containerDir);
    const outDir = config.keepOutputDir ?? path.join(work, "out");
    const args = ["partition", containerDir, "-o", outDir];
    if (config.threshold !== undefined) args.push("--threshold", String(config.threshold));
    if (config.beta !== undefined) args.push("--beta", String(config.beta));
    if (config.gas) args.push("--gas");
    if (config.paGaec === false) args.push("--no-pa-gaec");
    if (config.seed !== undefined) args.push("--seed", String(config.seed));
    if (config.minPixels !== undefined) args.push("--min-pixels", String(config.minPixels));
    runCli(args);

    const labels = decodePgm(fs.readFileSync(path.join(outDir, "labels.pgm")));
    const table = JSON.parse(
      fs.readFileSync(path.join(outDir, "segments.json"), "utf-8"));
    const remap = canonicalizeLabels(labels);
    const segments: SegmentRecord[] = table.instances.map((row: any) => ({
      id: remap.get(row.id) ?? row.id,
      classId: row.class_id,
      score: row.score,
      pixelCount: row.pixel_count,
      bbox: row.bbox as [number, number, number, number],
      rle: row.rle as number[],
    }));
    segments.sort((a, b) => a.id - b.id);
    return { labels, segments };
  } finally {
    fs.rmSync(work, { recursive: true, force: true });
  }
}
