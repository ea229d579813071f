"""Synthetic scenes: ground-truth pyramids with controllable noise.

Scenes are painted on the finest pyramid grid (a quarter of the input size
in each dimension) and blown up 4x to define the input-resolution ground
truth, so a perfect finest-level partition renders back to the exact
ground-truth masks. Coarser levels follow by majority-vote 2x downsampling.
Occlusion is modeled by background-colored bars that erase a band through
an instance, splitting it into disjoint parts whose re-merge is the job of
position-aware merging: bars are kept thin enough that the damping factor
of the split parts stays safely above the 0.5 merge threshold.

Ideal tensors per level: affinity 1 iff two neighbors share an instance id;
one-hot semantics blended toward uniform by the smoothing amount; embedding
centers on a lattice with pairwise squared distances >= 4 (so the Gaussian
similarity between different instances is at most 2^-4). Noise, where
requested, is applied on top of the ideals; affinity noise is drawn on the
down/right channels and mirrored, which preserves symmetry.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError, LogicError
from .losses import GroundTruthScene
from .types import (CH_DOWN, CH_LEFT, CH_RIGHT, CH_UP, AffinityMap, AffinityPyramid,
                    EmbeddingMap, GridShape, PyramidLevel, SemanticMap)

SHAPE_KINDS = ("rectangle", "ellipse", "polygon")


@dataclass(frozen=True)
class NoiseSpec:
    affinity_flip_rate: float = 0.0
    affinity_jitter: float = 0.0
    semantic_smoothing: float = 0.0
    embedding_noise: float = 0.0

    def validate(self) -> None:
        if not 0.0 <= self.affinity_flip_rate <= 1.0:
            raise InputError("affinity flip rate must lie in [0, 1]")
        if not 0.0 <= self.semantic_smoothing < 1.0:
            raise InputError("semantic smoothing must lie in [0, 1)")
        if self.affinity_jitter < 0 or self.embedding_noise < 0:
            raise InputError("noise scales must be >= 0")


@dataclass(frozen=True)
class SceneSpec:
    shape: tuple = (512, 512)            # input resolution, multiples of 4
    instance_range: tuple = (3, 12)
    shape_kinds: tuple = SHAPE_KINDS
    occluder_probability: float = 0.5
    classes: int = 4                     # class 0 is background
    embedding_dim: int = 8
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0
    n_levels: int = 4
    min_extent: int = 18                 # finest-level pixels; clamped to the grid
    gap: int = 2                         # finest-level spacing between instances

    def validate(self) -> None:
        h, w = self.shape
        if h < 16 or w < 16 or h % 4 or w % 4:
            raise InputError("scene shape must be multiples of 4 and at least 16x16")
        lo, hi = self.instance_range
        if not 1 <= lo <= hi:
            raise InputError("instance range must satisfy 1 <= lo <= hi")
        if not self.shape_kinds or any(k not in SHAPE_KINDS for k in self.shape_kinds):
            raise InputError(f"shape kinds must be among {SHAPE_KINDS}")
        if not 0.0 <= self.occluder_probability <= 1.0:
            raise InputError("occluder probability must lie in [0, 1]")
        if self.classes < 2:
            raise InputError("need a background class plus at least one instance class")
        if self.embedding_dim < 1:
            raise InputError("embedding dim must be >= 1")
        if self.n_levels < 1:
            raise InputError("need at least one pyramid level")
        self.noise.validate()
        if self._extent_bounds()[0] < 3:
            raise InputError(f"scene {h}x{w} is too small for any instance")

    def _extent_bounds(self) -> tuple[int, int]:
        h1, w1 = self.shape[0] // 4, self.shape[1] // 4
        cap = max(3, int(0.38 * min(h1, w1)))
        return min(self.min_extent, cap), cap

    @property
    def class_kinds(self) -> np.ndarray:
        kinds = np.ones(self.classes, dtype=bool)
        kinds[0] = False
        return kinds

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shape"] = list(self.shape)
        d["instance_range"] = list(self.instance_range)
        d["shape_kinds"] = list(self.shape_kinds)
        return d

    @staticmethod
    def from_dict(d: dict) -> "SceneSpec":
        d = dict(d)
        if "noise" in d and isinstance(d["noise"], dict):
            d["noise"] = NoiseSpec(**d["noise"])
        for key in ("shape", "instance_range", "shape_kinds"):
            if key in d:
                d[key] = tuple(d[key])
        spec = SceneSpec(**d)
        spec.validate()
        return spec


@dataclass
class InstanceInfo:
    id: int
    class_id: int
    pixel_count: int
    bbox: tuple           # at the level's own resolution
    n_components: int


@dataclass
class SyntheticScene:
    spec: SceneSpec
    pyramid: AffinityPyramid
    gt: GroundTruthScene                 # input resolution
    level_labels: list                   # finest first, matching pyramid levels
    level_tables: list                   # list of [InstanceInfo]
    class_of_id: np.ndarray


def _paint_shape(rng, kind: str, hh: int, ww: int) -> np.ndarray:
    if kind == "rectangle":
        return np.ones((hh, ww), dtype=bool)
    yy, xx = np.mgrid[0:hh, 0:ww]
    cy, cx = (hh - 1) / 2.0, (ww - 1) / 2.0
    ry, rx = hh / 2.0, ww / 2.0
    if kind == "ellipse":
        return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    # convex polygon: vertices on the ellipse at jittered sorted angles
    m = int(rng.integers(5, 9))
    angles = np.sort((np.arange(m) + rng.uniform(0.0, 0.8, m)) * (2 * np.pi / m))
    vy = cy + ry * 0.98 * np.sin(angles)
    vx = cx + rx * 0.98 * np.cos(angles)
    mask = np.ones((hh, ww), dtype=bool)
    for i in range(m):
        j = (i + 1) % m
        # keep the side of each directed edge that contains the center
        cross = (vx[j] - vx[i]) * (yy - vy[i]) - (vy[j] - vy[i]) * (xx - vx[i])
        center_side = (vx[j] - vx[i]) * (cy - vy[i]) - (vy[j] - vy[i]) * (cx - vx[i])
        mask &= cross >= 0 if center_side > 0 else cross <= 0
    return mask


def _place_instances(rng, spec: SceneSpec, h1: int, w1: int) -> np.ndarray:
    lo, hi = spec.instance_range
    target = int(rng.integers(lo, hi + 1))
    smin, smax_cap = spec._extent_bounds()
    # shrink upper size with crowding so the requested count usually fits
    smax = int(np.clip(0.9 * math.sqrt(h1 * w1 / max(target, 1)), smin, smax_cap))
    smax = max(smax, smin)
    labels = np.zeros((h1, w1), dtype=np.int32)
    boxes = []
    next_id = 1
    for _ in range(target):
        for _ in range(200):
            hh = int(rng.integers(smin, smax + 1))
            ww = int(rng.integers(max(smin, int(0.6 * hh)), min(smax, int(1.6 * hh)) + 1))
            if hh >= h1 or ww >= w1:
                continue
            y0 = int(rng.integers(0, h1 - hh + 1))
            x0 = int(rng.integers(0, w1 - ww + 1))
            g = spec.gap
            box = (y0 - g, x0 - g, y0 + hh + g, x0 + ww + g)
            if any(box[0] < b[2] and b[0] < box[2] and box[1] < b[3] and b[1] < box[3]
                   for b in boxes):
                continue
            kind = spec.shape_kinds[int(rng.integers(0, len(spec.shape_kinds)))]
            mask = _paint_shape(rng, kind, hh, ww)
            if mask.sum() < 9:
                continue
            patch = labels[y0:y0 + hh, x0:x0 + ww]
            patch[mask] = next_id
            boxes.append(box)
            next_id += 1
            break
    if next_id == 1:
        raise InputError("could not place any instance; scene too small for the requested instances")
    return labels


def _apply_occluders(rng, labels: np.ndarray, occ_p: float) -> None:
    """Erase a thin background band through each selected instance.

    The band spans the instance's full extent along one axis and sits
    strictly inside it along the other, which guarantees a split into at
    least two 4-disconnected parts. Thickness is about 14% of the visible
    extent, keeping the split parts' damping factor above the merge
    threshold at every pyramid scale.
    """
    for sid in range(1, int(labels.max()) + 1):
        if rng.random() >= occ_p:
            continue
        ys, xs = np.nonzero(labels == sid)
        if ys.size == 0:
            continue
        horizontal = bool(rng.integers(0, 2))
        rr = ys if horizontal else xs
        rmin, rmax = int(rr.min()), int(rr.max())
        extent = rmax - rmin + 1
        t = max(2, round(0.14 * extent))
        if extent < t + 4:
            continue
        center = rmin + extent / 2.0 + rng.uniform(-0.1, 0.1) * extent
        r0 = int(np.clip(round(center - t / 2.0), rmin + 1, rmax - t))
        if horizontal:
            band = labels[r0:r0 + t, :]
        else:
            band = labels[:, r0:r0 + t]
        band[band == sid] = 0


def _majority_downsample(labels: np.ndarray) -> np.ndarray:
    """2x majority-vote downsampling; ties pick the smallest label id."""
    h, w = labels.shape
    H, W = (h + 1) // 2, (w + 1) // 2
    padded = np.pad(labels, ((0, 2 * H - h), (0, 2 * W - w)), mode="edge")
    blocks = padded.reshape(H, 2, W, 2).transpose(0, 2, 1, 3).reshape(H, W, 4)
    v = np.sort(blocks, axis=2)
    counts = (v[..., :, None] == v[..., None, :]).sum(axis=3)
    pick = np.argmax(counts, axis=2)  # first max index = smallest value after sorting
    return np.take_along_axis(v, pick[..., None], axis=2)[..., 0]


def _embedding_centers(n_ids: int, dim: int) -> np.ndarray:
    centers = np.zeros((n_ids, dim), dtype=np.float64)
    centers[:, 0] = 2.0 * np.arange(n_ids)
    return centers


def _level_tensors(rng, labels: np.ndarray, class_of_id: np.ndarray,
                   centers: np.ndarray, spec: SceneSpec) -> PyramidLevel:
    noise = spec.noise
    h, w = labels.shape
    down = ((labels[:-1, :] == labels[1:, :]) & (labels[:-1, :] >= 1)).astype(np.float64)
    right = ((labels[:, :-1] == labels[:, 1:]) & (labels[:, :-1] >= 1)).astype(np.float64)
    if noise.affinity_flip_rate > 0:
        down = np.where(rng.random(down.shape) < noise.affinity_flip_rate, 1.0 - down, down)
        right = np.where(rng.random(right.shape) < noise.affinity_flip_rate, 1.0 - right, right)
    if noise.affinity_jitter > 0:
        down = np.clip(down + rng.normal(0.0, noise.affinity_jitter, down.shape), 0.0, 1.0)
        right = np.clip(right + rng.normal(0.0, noise.affinity_jitter, right.shape), 0.0, 1.0)
    aff = np.zeros((4, h, w), dtype=np.float32)
    aff[CH_DOWN, :-1, :] = down
    aff[CH_UP, 1:, :] = down
    aff[CH_RIGHT, :, :-1] = right
    aff[CH_LEFT, :, 1:] = right

    c = spec.classes
    eps = noise.semantic_smoothing
    onehot = np.zeros((c, h, w), dtype=np.float64)
    cls = class_of_id[labels]
    yy, xx = np.indices(labels.shape)
    onehot[cls, yy, xx] = 1.0
    sem = ((1.0 - eps) * onehot + eps / c).astype(np.float32)

    emb = centers[labels].transpose(2, 0, 1)
    if noise.embedding_noise > 0:
        emb = emb + rng.normal(0.0, noise.embedding_noise, emb.shape)
    return PyramidLevel(AffinityMap(aff), SemanticMap(sem),
                        EmbeddingMap(emb.astype(np.float32)))


def _level_table(labels: np.ndarray, class_of_id: np.ndarray) -> list:
    table = []
    for sid in np.unique(labels):
        if sid < 1:
            continue
        mask = labels == sid
        ys, xs = np.nonzero(mask)
        _, n_comp = ndimage.label(mask)
        table.append(InstanceInfo(
            id=int(sid),
            class_id=int(class_of_id[sid]),
            pixel_count=int(ys.size),
            bbox=(int(ys.min()), int(xs.min()), int(ys.max()), int(xs.max())),
            n_components=int(n_comp),
        ))
    return table


def _generate(spec: SceneSpec, with_ground_truth: bool):
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    h1, w1 = spec.shape[0] // 4, spec.shape[1] // 4

    painted = _place_instances(rng, spec, h1, w1)
    _apply_occluders(rng, painted, spec.occluder_probability)
    n_ids = int(painted.max()) + 1
    class_of_id = np.zeros(n_ids, dtype=np.int64)
    class_of_id[1:] = rng.integers(1, spec.classes, n_ids - 1)

    gt = None
    if with_ground_truth:
        full = np.kron(painted, np.ones((4, 4), dtype=np.int32))
        # per-level labels by majority chains from the input resolution
        lab = full
        for _ in range(2):
            lab = _majority_downsample(lab)
        if not np.array_equal(lab, painted):
            raise LogicError("finest-level labels must round-trip the painted scene")
        gt = GroundTruthScene.from_labels(full, class_of_id, spec.classes)
    else:
        lab = painted
    level_labels = [lab]
    for _ in range(spec.n_levels - 1):
        lab = _majority_downsample(lab)
        level_labels.append(lab)

    centers = _embedding_centers(n_ids, spec.embedding_dim)
    levels = [_level_tensors(rng, ll, class_of_id, centers, spec) for ll in level_labels]
    pyramid = AffinityPyramid(levels, spec.class_kinds)
    tables = [_level_table(ll, class_of_id) for ll in level_labels]

    if spec.occluder_probability >= 1.0:
        if not any(info.n_components >= 2 for info in tables[0]):
            raise LogicError("occluder probability 1 must split at least one instance")
    return SyntheticScene(spec, pyramid, gt, level_labels, tables, class_of_id)


def generate_scene(spec: SceneSpec) -> SyntheticScene:
    """Generate one scene: ground truth, pyramid and per-level tables.

    Bit-reproducible per seed. Draw order is fixed: placement, occluders,
    classes, then per-level tensor noise finest to coarsest.
    """
    return _generate(spec, with_ground_truth=True)


def generate_pyramid(spec: SceneSpec) -> AffinityPyramid:
    """Pyramid only, skipping input-resolution ground-truth assembly.

    Identical tensors to ``generate_scene(spec).pyramid`` (same seed, same
    draws); meant for runtime sweeps where the ground truth is never read.
    """
    return _generate(spec, with_ground_truth=False).pyramid


def benchmark_spec(shape, seed: int = 0, jitter: float = 0.05,
                   flip_rate: float = 0.002) -> SceneSpec:
    """Scene spec for runtime sweeps: instance count scales with area.

    Moderate noise combines affinity jitter with a small flip rate; flips
    create genuine over-segmentation work, which jitter alone does not.
    """
    h, w = shape
    # constant instance density (street scenes carry dozens per frame)
    count = int(np.clip(round(h * w / 2_097_152 * 32), 2, 512))
    return SceneSpec(shape=(h, w), instance_range=(count, count),
                     occluder_probability=0.5,
                     noise=NoiseSpec(affinity_jitter=jitter,
                                     affinity_flip_rate=flip_rate), seed=seed)
