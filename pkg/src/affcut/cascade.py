"""Coarse-to-fine partitioning across an affinity pyramid.

The coarsest level is partitioned from scratch; every finer level is seeded
with the upsampled previous result, whose boundary pixels are reset to
UNLABELED so the finer affinities can redraw them. Per level: greedy edge
contraction over the 4-neighbor affinities, then position-aware merging
over the resulting segments. At the finest level greedy association can
replace both passes for speed.

Background membership is decided per level from the semantic map (a pixel
participates iff its most likely class is an instance class; a probability
mass mode is available), so objects missing from coarse levels enter the
graph as fresh unlabeled pixels once they appear.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .construct import build_level_graph, participation_mask
from .errors import InputError
from .gas import gas
from .graph import Segment
from .position_aware import pa_gaec_arrays
from .types import (BACKGROUND, UNLABELED, AffinityPyramid, GridShape, LabelMap,
                    PyramidLevel)


@dataclass(frozen=True)
class CascadeConfig:
    threshold: float = 0.5
    beta: float = 0.5
    gas_enabled: bool = False
    pa_gaec_enabled: bool = True
    full_pairs: bool = False
    seed: int = 0
    min_pixels: int = 16
    background_mode: str = "argmax"
    background_min_prob: float = 0.5


@dataclass
class ScoredInstance:
    """Final instance at input resolution, ready for matching/serialization."""

    id: int
    class_id: int
    score: float
    mask: np.ndarray        # (H, W) bool
    pixel_count: int        # pixels at input resolution
    bbox: tuple = None      # (y0, x0, y1, x1) inclusive, input resolution

    def __post_init__(self):
        if self.bbox is None:
            ys, xs = np.nonzero(self.mask)
            self.bbox = (int(ys.min()), int(xs.min()), int(ys.max()), int(xs.max()))


@dataclass
class CascadeResult:
    labels: LabelMap                 # finest-level labels, ids raster-canonical
    segments: list                   # one Segment per emitted instance id
    class_kinds: np.ndarray


def _upsample_unlabel(src: np.ndarray, th: int, tw: int) -> np.ndarray:
    h, w = src.shape
    if th not in (2 * h - 1, 2 * h) or tw not in (2 * w - 1, 2 * w):
        raise InputError(f"target {th}x{tw} is not a 2x upsampling of {h}x{w}")
    up = np.repeat(np.repeat(src, 2, axis=0), 2, axis=1)[:th, :tw]
    diff = np.zeros((th, tw), dtype=bool)
    ydiff = up[:-1, :] != up[1:, :]
    diff[:-1, :] |= ydiff
    diff[1:, :] |= ydiff
    xdiff = up[:, :-1] != up[:, 1:]
    diff[:, :-1] |= xdiff
    diff[:, 1:] |= xdiff
    return np.where(diff, np.int32(UNLABELED), up)


def upsample_labels(labels: LabelMap, target: GridShape) -> LabelMap:
    """Nearest 2x upsampling followed by boundary unlabeling.

    Every pixel with a 4-neighbor of a different label (background against
    instance included) becomes UNLABELED; label interiors and background
    interiors are untouched. The image border itself is not a boundary.
    """
    return LabelMap(_upsample_unlabel(labels.labels, target.height, target.width))


def _segments_from_labels(labels: np.ndarray, level: PyramidLevel) -> list:
    """Per-id segment statistics recomputed from a final label map."""
    n_ids = int(labels.max(initial=0)) + 1
    if n_ids <= 1:
        return []
    count, bbox, sem_sum, emb_sum = kernels.id_stats(
        labels, level.semantic.values, level.embedding.values, n_ids)
    return [Segment(sid, int(count[sid]), tuple(int(b) for b in bbox[sid]),
                    sem_sum[sid], emb_sum[sid])
            for sid in range(1, n_ids) if count[sid] > 0]


def _partition_level(level: PyramidLevel, seeds: np.ndarray, cfg: CascadeConfig):
    """One level: pixel contraction then segment merging. Returns (labels, segments)."""
    lg = build_level_graph(level.affinity, level.semantic, level.embedding, seeds)
    shape = seeds.shape
    if lg.n == 0:
        return np.full(shape, BACKGROUND, dtype=np.int32), []
    root, _, _, _ = kernels.gaec_core(lg.n, lg.edges_u, lg.edges_v, lg.edges_a,
                                      cfg.threshold, validate=False)
    roots, comp_group = np.unique(root, return_inverse=True)
    n_seg = roots.size

    count = np.zeros(n_seg, dtype=np.int64)
    np.add.at(count, comp_group, lg.count)
    sem_sum = np.zeros((n_seg, lg.sem_sum.shape[1]))
    np.add.at(sem_sum, comp_group, lg.sem_sum)
    emb_sum = np.zeros((n_seg, lg.emb_sum.shape[1]))
    np.add.at(emb_sum, comp_group, lg.emb_sum)
    bbox = np.empty((n_seg, 4), dtype=np.int64)
    bbox[:, :2] = np.iinfo(np.int64).max
    bbox[:, 2:] = np.iinfo(np.int64).min
    np.minimum.at(bbox[:, 0], comp_group, lg.bbox[:, 0])
    np.minimum.at(bbox[:, 1], comp_group, lg.bbox[:, 1])
    np.maximum.at(bbox[:, 2], comp_group, lg.bbox[:, 2])
    np.maximum.at(bbox[:, 3], comp_group, lg.bbox[:, 3])

    if cfg.pa_gaec_enabled and n_seg > 1:
        merged = pa_gaec_arrays(count, bbox, sem_sum, emb_sum,
                                cfg.threshold, cfg.beta, cfg.full_pairs)
        group_of_seg = np.empty(n_seg, dtype=np.int64)
        for gi, group in enumerate(merged.groups):
            for si in group:
                group_of_seg[si] = gi
        final_segments = merged.segments
    else:
        group_of_seg = np.arange(n_seg, dtype=np.int64)
        final_segments = [Segment(i, int(count[i]), tuple(int(b) for b in bbox[i]),
                                  sem_sum[i], emb_sum[i]) for i in range(n_seg)]

    # pixel -> component -> merged segment -> 1-based label
    comp_to_label = (group_of_seg[comp_group] + 1).astype(np.int32)
    labels = np.full(shape, BACKGROUND, dtype=np.int32)
    active = lg.comp >= 0
    labels[active] = comp_to_label[lg.comp[active]]
    out_segments = [Segment(gi + 1, s.pixel_count, s.bbox, s.semantic_sum, s.embedding_sum)
                    for gi, s in enumerate(final_segments)]
    return labels, out_segments


def _canonicalize(labels: np.ndarray, segments: list):
    """Renumber instance ids 1..K in raster order of each id's first pixel."""
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids >= 1
    ids, first = ids[keep], first[keep]
    order = np.argsort(first, kind="stable")
    remap = np.zeros(int(ids.max(initial=0)) + 1, dtype=np.int32)
    by_id = {s.id: s for s in segments}
    out_segments = []
    for new_id, pos in enumerate(order, start=1):
        old = int(ids[pos])
        remap[old] = new_id
        s = by_id[old]
        out_segments.append(Segment(new_id, s.pixel_count, s.bbox,
                                    s.semantic_sum, s.embedding_sum))
    relabeled = np.where(flat >= 1, remap[np.maximum(flat, 0)], flat).reshape(labels.shape)
    return relabeled.astype(np.int32), out_segments


def cascade_gaec(pyramid: AffinityPyramid, cfg: CascadeConfig = CascadeConfig()) -> CascadeResult:
    """Partition an affinity pyramid coarsest to finest.

    Returns finest-level labels (background 0, instance ids canonicalized in
    raster order) plus per-instance segment statistics. With ``gas_enabled``
    the finest level is resolved by greedy association and returned
    immediately instead of running the two contraction passes.

    The pyramid's structure (level shapes, class counts) is checked here;
    deep per-tensor validation belongs to the container reader.
    """
    c, k = pyramid.classes, pyramid.embedding_dim
    if pyramid.class_kinds.shape[0] != c:
        raise InputError("class_kinds length must equal the class count")
    for i, lvl in enumerate(pyramid.levels):
        if lvl.semantic.classes != c or lvl.embedding.dim != k:
            raise InputError(f"level {i + 1} disagrees on class count or embedding dim")
        if i > 0 and lvl.shape != pyramid.levels[i - 1].shape.half():
            raise InputError(f"level {i + 1} does not halve level {i}")
    levels = pyramid.levels
    prev: np.ndarray | None = None
    labels = np.full(levels[-1].semantic.values.shape[1:], BACKGROUND, dtype=np.int32)
    segments: list = []
    for li in range(len(levels) - 1, -1, -1):
        level = levels[li]
        part = participation_mask(level.semantic, pyramid.class_kinds,
                                  cfg.background_mode, cfg.background_min_prob)
        th, tw = level.semantic.values.shape[1:]
        if prev is None:
            seeds = np.where(part, np.int32(UNLABELED), np.int32(BACKGROUND))
        else:
            up = _upsample_unlabel(prev, th, tw)
            seeds = np.where(part, np.where(up >= 1, up, np.int32(UNLABELED)),
                             np.int32(BACKGROUND))
        if li == 0 and cfg.gas_enabled:
            final = gas(LabelMap(seeds), level.affinity, cfg.threshold, cfg.seed)
            labels = final.labels
            segments = _segments_from_labels(labels, level)
            break
        labels, segments = _partition_level(level, seeds, cfg)
        prev = labels
    labels, segments = _canonicalize(labels, segments)
    return CascadeResult(LabelMap(labels), segments, pyramid.class_kinds)


def render_instances(labels: LabelMap, segments, input_shape: GridShape, class_kinds,
                     min_pixels: int = 16) -> list:
    """Blow finest-level labels up 4x and emit scored instance masks.

    Class is the argmax of each segment's mean class distribution restricted
    to instance classes; the score is that class's mean probability.
    Segments below ``min_pixels`` (finest-level pixels) are dropped and ids
    are renumbered to stay contiguous.
    """
    h, w = labels.shape
    H, W = input_shape
    if H != 4 * h or W != 4 * w:
        raise InputError(f"input shape {H}x{W} must be 4x the label shape {h}x{w}")
    kinds = np.asarray(class_kinds, dtype=bool)
    instance_classes = np.flatnonzero(kinds)
    if instance_classes.size == 0:
        raise InputError("at least one instance class is required")
    lab = labels.labels
    out = []
    next_id = 1
    for seg in segments:
        if seg.pixel_count < min_pixels:
            continue
        mean = seg.mean_semantic
        cls = int(instance_classes[int(np.argmax(mean[instance_classes]))])
        y0, x0, y1, x1 = seg.bbox
        mask = np.zeros((H, W), dtype=bool)
        sub = lab[y0:y1 + 1, x0:x1 + 1] == seg.id
        mask[4 * y0:4 * y1 + 4, 4 * x0:4 * x1 + 4] = \
            np.repeat(np.repeat(sub, 4, axis=0), 4, axis=1)
        out.append(ScoredInstance(
            id=next_id,
            class_id=cls,
            score=float(mean[cls]),
            mask=mask,
            pixel_count=int(seg.pixel_count) * 16,
            bbox=(4 * y0, 4 * x0, 4 * y1 + 3, 4 * x1 + 3),
        ))
        next_id += 1
    return out


def instance_label_image(instances, input_shape: GridShape) -> np.ndarray:
    """Dense uint16 label image from rendered instances (0 = background)."""
    H, W = input_shape
    img = np.zeros((H, W), dtype=np.uint16)
    if len(instances) > np.iinfo(np.uint16).max:
        raise InputError("too many instances for a 16-bit label image")
    for inst in instances:
        img[inst.mask] = inst.id
    return img
