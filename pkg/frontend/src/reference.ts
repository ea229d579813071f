/** Reference math functions, delegated over the CLI's JSON bridge. */

import { runCli } from "./runner.js";
import { GroundTruthPayload } from "./types.js";

function call(fn: string, payload: unknown): any {
  return JSON.parse(runCli(["api", fn], JSON.stringify(payload)));
}

/** Gaussian similarity exp(-alpha * ||a - b||^2); alpha defaults to ln 2. */
export function phi(xA: ArrayLike<number>, xB: ArrayLike<number>,
                    alpha?: number): number {
  return call("phi", {
    x_a: Array.from(xA),
    x_b: Array.from(xB),
    ...(alpha === undefined ? {} : { alpha }),
  }).value;
}

export interface GroupingLosses {
  push: number;
  pull: number;
  nInstances: number;
}

/** Push/pull losses of a k x h x w embedding tensor against instance labels. */
export function groupingLosses(embedding: number[][][],
                               gt: GroundTruthPayload): GroupingLosses {
  const out = call("grouping_losses", {
    embedding,
    labels: gt.labels,
    class_of_id: gt.classOfId,
    classes: gt.classes,
  });
  return { push: out.push, pull: out.pull, nInstances: out.n_instances };
}

export interface SemanticAffinityLosses {
  semantic: number;
  boundary: number;
  solid: number;
  nBoundary: number;
  nSolid: number;
}

/** Cross-entropy and split affinity BCE terms of dense predictions. */
export function semanticAffinityLosses(semantic: number[][][],
                                       affinity: number[][][],
                                       gt: GroundTruthPayload,
                                       weights?: number[][]): SemanticAffinityLosses {
  const out = call("semantic_affinity_losses", {
    semantic,
    affinity,
    labels: gt.labels,
    class_of_id: gt.classOfId,
    classes: gt.classes,
    ...(weights === undefined ? {} : { weights }),
  });
  return {
    semantic: out.semantic,
    boundary: out.boundary,
    solid: out.solid,
    nBoundary: out.n_boundary,
    nSolid: out.n_solid,
  };
}
