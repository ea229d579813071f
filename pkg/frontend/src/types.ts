/** Shared shapes of the binding surface. */

/** Dense tensors of one pyramid level, channel-major float32. */
export interface LevelTensors {
  height: number;
  width: number;
  /** 4 x h x w, channel order (up, down, left, right), values in [0, 1]. */
  affinity: Float32Array;
  /** c x h x w per-pixel class distributions. */
  semantic: Float32Array;
  /** k x h x w grouping embeddings. */
  embedding: Float32Array;
}

export interface PartitionConfig {
  threshold?: number;
  beta?: number;
  gas?: boolean;
  paGaec?: boolean;
  seed?: number;
  minPixels?: number;
  /** Copy the CLI output files (segments.json, labels.pgm) here. */
  keepOutputDir?: string;
}

export interface SegmentRecord {
  id: number;
  classId: number;
  score: number;
  pixelCount: number;
  /** y0, x0, y1, x1 inclusive, input resolution. */
  bbox: [number, number, number, number];
  /** Row-major run-length encoding: start, length, start, length, ... */
  rle: number[];
}

export interface LabelImage {
  height: number;
  width: number;
  /** Row-major instance ids, 0 = background. */
  data: Uint16Array;
}

export interface PartitionResult {
  labels: LabelImage;
  segments: SegmentRecord[];
}

export interface GroundTruthPayload {
  /** Row-major instance labels, 0 = background, ids >= 1. */
  labels: number[][];
  /** Class index per instance id (index 0 = background class). */
  classOfId: number[];
  classes: number;
}
