/** Array-based bindings for the affcut partitioning engine.

Everything delegates to the installed CLI: `partition` round-trips tensors
through the on-disk container format, the reference functions go over the
JSON bridge. Nothing is re-implemented here.
*/

export { partition, canonicalizeLabels } from "./partition.js";
export { phi, groupingLosses, semanticAffinityLosses } from "./reference.js";
export type { GroupingLosses, SemanticAffinityLosses } from "./reference.js";
export { readPyramid, writePyramid, validateLevels } from "./container.js";
export { decodePgm } from "./pgm.js";
export { decodeRle } from "./rle.js";
export { cliCommand, runCli } from "./runner.js";
export { CliError, DimensionError, DtypeError } from "./errors.js";
export type { GroundTruthPayload, LabelImage, LevelTensors, PartitionConfig,
               PartitionResult, SegmentRecord } from "./types.js";
