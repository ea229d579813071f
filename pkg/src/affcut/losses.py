"""Reference loss functions over affinity, semantic and embedding outputs.

Pure functions with no training machinery. Probabilities fed to logarithms
are clipped to [1e-7, 1 - 1e-7] to keep saturated predictions finite.
Analytic gradients are provided for the Gaussian kernel and the grouping
losses so array consumers can verify them against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .types import (BACKGROUND, CH_DOWN, CH_LEFT, CH_RIGHT, CH_UP, AffinityMap,
                    EmbeddingMap, SemanticMap)

LN2 = math.log(2.0)
CLIP_EPS = 1e-7


def _clip(p):
    return np.clip(p, CLIP_EPS, 1.0 - CLIP_EPS)


def bce(target, prob) -> float:
    """Binary cross-entropy with clipped probability."""
    p = float(np.clip(prob, CLIP_EPS, 1.0 - CLIP_EPS))
    t = float(target)
    return -t * math.log(p) - (1.0 - t) * math.log(1.0 - p)


def phi(x_a, x_b, alpha: float = LN2) -> float:
    """Gaussian similarity exp(-alpha * ||x_a - x_b||^2) in (0, 1].

    With the default alpha = ln 2, a squared distance of 1 maps to exactly
    0.5, so distances above 1 fall below the merge threshold.
    """
    x_a = np.asarray(x_a, dtype=np.float64)
    x_b = np.asarray(x_b, dtype=np.float64)
    if x_a.shape != x_b.shape:
        raise InputError(f"embedding dims differ: {x_a.shape} vs {x_b.shape}")
    if not (np.isfinite(x_a).all() and np.isfinite(x_b).all()):
        raise InputError("embeddings must be finite")
    d = x_a - x_b
    return float(np.exp(-alpha * np.dot(d, d)))


def phi_grad(x_a, x_b, alpha: float = LN2) -> np.ndarray:
    """Gradient of ``phi`` with respect to ``x_a`` (negate for ``x_b``)."""
    x_a = np.asarray(x_a, dtype=np.float64)
    x_b = np.asarray(x_b, dtype=np.float64)
    d = x_a - x_b
    return -2.0 * alpha * d * float(np.exp(-alpha * np.dot(d, d)))


@dataclass
class GroundTruthScene:
    """Ground truth for one image: labels plus derived training targets.

    ``labels``: int map, 0 background, >= 1 instance ids. ``semantic_onehot``
    is (c, h, w); ``affinity_gt`` is the 0/1 four-neighbor map (1 iff both
    pixels share an instance id); ``boundary_mask`` marks pixels with at
    least one 4-neighbor of a different label.
    """

    labels: np.ndarray
    semantic_onehot: np.ndarray
    affinity_gt: np.ndarray
    boundary_mask: np.ndarray

    @property
    def n_boundary(self) -> int:
        return int(self.boundary_mask.sum())

    @property
    def instance_ids(self) -> np.ndarray:
        ids = np.unique(self.labels)
        return ids[ids >= 1]

    @staticmethod
    def from_labels(labels, class_of_id, n_classes: int) -> "GroundTruthScene":
        labels = np.ascontiguousarray(labels, dtype=np.int32)
        class_of_id = np.asarray(class_of_id, dtype=np.int64)
        if labels.min(initial=0) < 0:
            raise InputError("ground-truth labels cannot be negative")
        if class_of_id.shape[0] <= labels.max(initial=0):
            raise InputError("class_of_id does not cover every instance id")
        onehot = np.zeros((n_classes,) + labels.shape, dtype=np.float64)
        cls = class_of_id[labels]
        yy, xx = np.indices(labels.shape)
        onehot[cls, yy, xx] = 1.0

        aff = np.zeros((4,) + labels.shape, dtype=np.float64)
        down = (labels[:-1, :] == labels[1:, :]) & (labels[:-1, :] >= 1)
        right = (labels[:, :-1] == labels[:, 1:]) & (labels[:, :-1] >= 1)
        aff[CH_DOWN, :-1, :] = down
        aff[CH_UP, 1:, :] = down
        aff[CH_RIGHT, :, :-1] = right
        aff[CH_LEFT, :, 1:] = right

        boundary = np.zeros(labels.shape, dtype=bool)
        ydiff = labels[:-1, :] != labels[1:, :]
        boundary[:-1, :] |= ydiff
        boundary[1:, :] |= ydiff
        xdiff = labels[:, :-1] != labels[:, 1:]
        boundary[:, :-1] |= xdiff
        boundary[:, 1:] |= xdiff
        return GroundTruthScene(labels, onehot, aff, boundary)


@dataclass
class GroupingLosses:
    push: float            # mean BCE(0, phi) over ordered pairs of distinct instance means
    pull: float            # mean over instances of mean BCE(1, phi(mean, pixel))
    n_instances: int

    @property
    def push_defined(self) -> bool:
        return self.n_instances >= 2

    @property
    def pull_defined(self) -> bool:
        return self.n_instances >= 1


def _instance_pixels(gt: GroundTruthScene):
    for sid in gt.instance_ids:
        ys, xs = np.nonzero(gt.labels == sid)
        yield int(sid), ys, xs


def grouping_losses(embedding: EmbeddingMap, gt: GroundTruthScene, alpha: float = LN2) -> GroupingLosses:
    """Push/pull losses over per-instance mean embeddings.

    Push drives distinct instance means apart (target similarity 0 over the
    ordered distinct pairs, normalizer n^2 - n); pull draws member pixels to
    their instance mean (target similarity 1). Degenerate counts yield 0 for
    the affected term, flagged via the result's ``*_defined`` properties.
    """
    if tuple(embedding.shape) != gt.labels.shape:
        raise InputError("embedding map and ground truth shapes differ")
    emb = embedding.values.astype(np.float64)
    means = []
    pull_terms = []
    for _, ys, xs in _instance_pixels(gt):
        pix = emb[:, ys, xs]
        mean = pix.mean(axis=1)
        means.append(mean)
        sim = _clip(np.exp(-alpha * ((pix - mean[:, None]) ** 2).sum(axis=0)))
        pull_terms.append(float(-np.log(sim).mean()))
    n = len(means)
    pull = float(np.mean(pull_terms)) if n >= 1 else 0.0
    push = 0.0
    if n >= 2:
        total = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    total += bce(0.0, phi(means[i], means[j], alpha))
        push = total / (n * n - n)
    return GroupingLosses(push=push, pull=pull, n_instances=n)


def grouping_losses_grad(embedding: EmbeddingMap, gt: GroundTruthScene,
                         alpha: float = LN2):
    """Analytic gradients of (push, pull) with respect to every pixel embedding.

    Returns two (k, h, w) arrays. Saturated similarities (outside the clip
    range) contribute zero gradient, matching the clipped forward pass.
    """
    emb = embedding.values.astype(np.float64)
    k = emb.shape[0]
    grad_push = np.zeros_like(emb)
    grad_pull = np.zeros_like(emb)
    instances = list(_instance_pixels(gt))
    n = len(instances)
    if n == 0:
        return grad_push, grad_pull

    means = []
    for _, ys, xs in instances:
        means.append(emb[:, ys, xs].mean(axis=1))

    # pull: mean over instances of mean over pixels of -log clip(phi(mean, pixel))
    for (sid, ys, xs), mean in zip(instances, means):
        pix = emb[:, ys, xs]
        n_pix = pix.shape[1]
        diff = mean[:, None] - pix                      # (k, n_pix)
        sim = np.exp(-alpha * (diff ** 2).sum(axis=0))  # (k,)
        live = (sim > CLIP_EPS) & (sim < 1.0 - CLIP_EPS)
        # d(-log phi)/d diff = 2 alpha diff where the clip is inactive
        coeff = np.where(live, 2.0 * alpha, 0.0) / (n * n_pix)
        grad_pix = -coeff * diff
        np.add.at(grad_pull, (slice(None), ys, xs), grad_pix)
        mean_part = (coeff * diff).sum(axis=1) / n_pix
        np.add.at(grad_pull, (slice(None), ys, xs), np.repeat(mean_part[:, None], n_pix, axis=1))

    # push: mean over ordered distinct pairs of -log(1 - clip(phi(mean_i, mean_j))).
    # Each unordered pair appears twice and each appearance depends on both
    # means, which doubles the per-pair contribution to mean_i.
    if n >= 2:
        norm = float(n * n - n)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                d = means[i] - means[j]
                sim = float(np.exp(-alpha * np.dot(d, d)))
                if not (CLIP_EPS < sim < 1.0 - CLIP_EPS):
                    continue
                # d(-log(1-p))/d mean_i = (1/(1-p)) * dp/dmean_i
                gm = 2.0 * (1.0 / (1.0 - sim)) * (-2.0 * alpha * d * sim) / norm
                sid_i, ys, xs = instances[i]
                np.add.at(grad_push, (slice(None), ys, xs),
                          np.repeat((gm / ys.size)[:, None], ys.size, axis=1))
    return grad_push, grad_pull


@dataclass
class SemanticAffinityLosses:
    semantic: float        # mean cross-entropy of the class distributions
    boundary: float        # weighted BCE over boundary pixels' four affinities
    solid: float           # same over non-boundary pixels
    n_boundary: int
    n_solid: int

    @property
    def boundary_defined(self) -> bool:
        return self.n_boundary > 0

    @property
    def solid_defined(self) -> bool:
        return self.n_solid > 0


def semantic_affinity_losses(semantic: SemanticMap, affinity: AffinityMap,
                             gt: GroundTruthScene, weights=None) -> SemanticAffinityLosses:
    """Cross-entropy of the semantic map plus split affinity BCE terms.

    The affinity loss is averaged separately over boundary pixels and solid
    (non-boundary) pixels, each pixel contributing its per-pixel weight
    times the summed BCE of its four directional affinities. Weights default
    to one everywhere.
    """
    if tuple(semantic.shape) != gt.labels.shape or tuple(affinity.shape) != gt.labels.shape:
        raise InputError("prediction and ground-truth shapes differ")
    h, w = gt.labels.shape
    if weights is None:
        weights = np.ones((h, w), dtype=np.float64)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (h, w):
            raise InputError("weights must be one scalar per pixel")
        if (weights <= 0).any():
            raise InputError("weights must be strictly positive")

    p_sem = _clip(semantic.values.astype(np.float64))
    sem_loss = float(-(gt.semantic_onehot * np.log(p_sem)).sum() / (h * w))

    p_aff = _clip(affinity.values.astype(np.float64))
    q_aff = gt.affinity_gt
    pixel_bce = -(q_aff * np.log(p_aff) + (1.0 - q_aff) * np.log(1.0 - p_aff)).sum(axis=0)
    weighted = weights * pixel_bce

    bmask = gt.boundary_mask
    n_b = int(bmask.sum())
    n_s = h * w - n_b
    boundary = float(weighted[bmask].sum() / n_b) if n_b else 0.0
    solid = float(weighted[~bmask].sum() / n_s) if n_s else 0.0
    return SemanticAffinityLosses(semantic=sem_loss, boundary=boundary, solid=solid,
                                  n_boundary=n_b, n_solid=n_s)


@dataclass
class LossWeights:
    """Per-level loss weights; all non-negative."""

    semantic: float = 2.0
    push: float = 0.5
    pull: float = 0.5
    boundary: float = 1.0
    solid: float = 1.0

    def __post_init__(self):
        for name in ("semantic", "push", "pull", "boundary", "solid"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InputError(f"loss weight {name} must be finite and >= 0")


def default_loss_weights(n_levels: int = 4) -> list[LossWeights]:
    """Decaying affinity weights toward the finest level (0.25, 0.5, 1, 1)."""
    schedule = [0.25, 0.5] + [1.0] * max(0, n_levels - 2)
    return [LossWeights(boundary=schedule[i], solid=schedule[i]) for i in range(n_levels)]


def total_loss(per_level, weights) -> float:
    """Weighted sum of all level losses.

    ``per_level``: list of (SemanticAffinityLosses, GroupingLosses);
    ``weights``: matching list of LossWeights.
    """
    if len(per_level) != len(weights):
        raise InputError("one LossWeights per level is required")
    total = 0.0
    for (sem_aff, grouping), w in zip(per_level, weights):
        total += w.semantic * sem_aff.semantic
        total += w.boundary * sem_aff.boundary
        total += w.solid * sem_aff.solid
        total += w.push * grouping.push
        total += w.pull * grouping.pull
    return total
