import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { DimensionError, DtypeError, decodePgm, decodeRle, groupingLosses,
         partition, phi, readPyramid, runCli,
         semanticAffinityLosses } from "../src/index.js";
import type { LevelTensors } from "../src/types.js";

const FIXTURES = 20;

let work: string;

beforeAll(() => {
  work = fs.mkdtempSync(path.join(os.tmpdir(), "affcut-fixtures-"));
  const spec = {
    shape: [128, 128],
    instance_range: [2, 5],
    occluder_probability: 1.0,
    noise: { affinity_jitter: 0.03, affinity_flip_rate: 0.002 },
    seed: 0,
  };
  const specPath = path.join(work, "spec.json");
  fs.writeFileSync(specPath, JSON.stringify(spec));
  runCli(["synth", "--spec", specPath, "--count", String(FIXTURES),
          "-o", path.join(work, "scenes")]);
}, 120_000);

afterAll(() => {
  fs.rmSync(work, { recursive: true, force: true });
});

describe("partition parity with the CLI", () => {
  it("matches CLI output bitwise on every fixture pyramid", () => {
    for (let i = 0; i < FIXTURES; i += 1) {
      const sceneDir = path.join(work, "scenes", `scene_${String(i).padStart(3, "0")}`);
      const cliOut = path.join(work, `cli_${i}`);
      runCli(["partition", sceneDir, "--seed", "0", "-o", cliOut]);

      const { levels, classKinds } = readPyramid(sceneDir);
      const bindingsOut = path.join(work, `bind_${i}`);
      const result = partition(levels, classKinds,
                               { seed: 0, keepOutputDir: bindingsOut });

      // byte-for-byte identical serialized outputs
      expect(fs.readFileSync(path.join(bindingsOut, "labels.pgm")))
        .toEqual(fs.readFileSync(path.join(cliOut, "labels.pgm")));
      expect(fs.readFileSync(path.join(bindingsOut, "segments.json")))
        .toEqual(fs.readFileSync(path.join(cliOut, "segments.json")));

      // and the decoded arrays agree after id canonicalization
      const cliLabels = decodePgm(fs.readFileSync(path.join(cliOut, "labels.pgm")));
      expect(result.labels.data).toEqual(cliLabels.data);
      const table = JSON.parse(
        fs.readFileSync(path.join(cliOut, "segments.json"), "utf-8"));
      expect(result.segments.length).toBe(table.instances.length);
      for (const [k, row] of table.instances.entries()) {
        expect(result.segments[k].id).toBe(row.id);
        expect(result.segments[k].classId).toBe(row.class_id);
        expect(result.segments[k].score).toBe(row.score);
        expect(result.segments[k].pixelCount).toBe(row.pixel_count);
        expect(result.segments[k].rle).toEqual(row.rle);
      }
    }
  }, 300_000);

  it("masks decode to the pixel counts the table declares", () => {
    const sceneDir = path.join(work, "scenes", "scene_000");
    const { levels, classKinds } = readPyramid(sceneDir);
    const result = partition(levels, classKinds, { seed: 0 });
    const { height, width } = result.labels;
    for (const seg of result.segments) {
      const mask = decodeRle(seg.rle, height, width);
      let count = 0;
      for (const v of mask) count += v;
      expect(count).toBe(seg.pixelCount);
    }
  }, 60_000);

  it("config flags reach the engine", () => {
    const sceneDir = path.join(work, "scenes", "scene_001");
    const { levels, classKinds } = readPyramid(sceneDir);
    const merged = partition(levels, classKinds, { seed: 0 });
    const split = partition(levels, classKinds, { seed: 0, paGaec: false });
    expect(split.segments.length).toBeGreaterThanOrEqual(merged.segments.length);
  }, 60_000);
});

describe("input validation", () => {
  function level(): LevelTensors {
    return {
      height: 2,
      width: 2,
      affinity: new Float32Array(16),
      semantic: new Float32Array(8).fill(0.5),
      embedding: new Float32Array(4),
    };
  }

  it("rejects non-float32 tensors with a typed error", () => {
    const bad = level() as any;
    bad.affinity = new Float64Array(16);
    expect(() => partition([bad], [false, true])).toThrow(DtypeError);
    expect(() => partition([bad], [false, true])).toThrow(/Float32Array/);
  });

  it("rejects dimension violations with a typed error", () => {
    const short = level();
    short.affinity = new Float32Array(12);
    expect(() => partition([short], [false, true])).toThrow(DimensionError);

    const a = level();
    const b = level();
    b.height = 2; // not a 2x downscale of a
    expect(() => partition([a, b], [false, true])).toThrow(DimensionError);

    expect(() => partition([level()], [false])).toThrow(DimensionError);
  });
});

describe("reference functions across the bridge", () => {
  it("phi identities", () => {
    expect(phi([0.3, -1.2], [0.3, -1.2])).toBe(1.0);
    expect(phi([0, 0], [1, 0])).toBeCloseTo(0.5, 12);
    expect(phi([0, 0], [1, 1])).toBeCloseTo(0.25, 12);
    expect(phi([0], [2], Math.LN2)).toBeCloseTo(Math.pow(0.5, 4), 12);
  });

  it("grouping losses on a two-instance fixture", () => {
    const gt = {
      labels: [[1, 1], [0, 2]],
      classOfId: [0, 1, 1],
      classes: 2,
    };
    const embedding = [[[0.0, 0.0], [0.0, 1.0]]]; // k=1: means 0 and 1
    const out = groupingLosses(embedding, gt);
    expect(out.nInstances).toBe(2);
    expect(out.pull).toBeCloseTo(0.0, 6);
    expect(out.push).toBeCloseTo(-Math.log(0.5), 9);
  });

  it("semantic and affinity losses vanish on perfect predictions", () => {
    const gt = {
      labels: [[1, 1], [1, 1]],
      classOfId: [0, 1],
      classes: 2,
    };
    const semantic = [
      [[0, 0], [0, 0]],
      [[1, 1], [1, 1]],
    ];
    const affinity = [
      [[0, 0], [1, 1]],   // up
      [[1, 1], [0, 0]],   // down
      [[0, 1], [0, 1]],   // left
      [[1, 0], [1, 0]],   // right
    ];
    const out = semanticAffinityLosses(semantic, affinity, gt);
    expect(out.semantic).toBeLessThan(1e-6);
    expect(out.solid).toBeLessThan(1e-5);
    expect(out.nBoundary).toBe(0);
  });
});
