"""Vectorized construction of pixel-level contraction graphs.

Shared by the object-level ``ContractionGraph`` builder and by the cascade
hot path, so both see identical vertices, statistics and edge affinities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InputError
from .types import BACKGROUND, CH_DOWN, CH_RIGHT, AffinityMap, EmbeddingMap, SemanticMap


def participation_mask(semantic: SemanticMap, class_kinds, mode: str = "argmax",
                       min_prob: float = 0.5) -> np.ndarray:
    """Pixels that take part in partitioning (everything else is background).

    ``argmax``: the most likely class is an instance class. ``prob``: the
    total instance-class probability mass reaches ``min_prob``.
    """
    kinds = np.asarray(class_kinds, dtype=bool)
    if kinds.shape[0] != semantic.classes:
        raise InputError("class_kinds length must equal the semantic class count")
    if mode == "argmax":
        return kinds[np.argmax(semantic.values, axis=0)]
    if mode == "prob":
        mass = semantic.values[kinds].sum(axis=0, dtype=np.float64)
        return mass >= min_prob
    raise InputError(f"unknown background mode {mode!r}")


def seeded_components(seed_labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Group seeded pixels into 4-connected same-id components.

    ``seed_labels``: int map with BACKGROUND (excluded), UNLABELED (-1,
    singleton vertices) and positive seed ids. A seed id spanning several
    disconnected regions yields one vertex per region. Returns a dense
    component map (-1 on background) and the component count; components
    are numbered by their first raster pixel.
    """
    return kernels.label_components(seed_labels)


def component_stats(comp: np.ndarray, n_comp: int, semantic: SemanticMap,
                    embedding: EmbeddingMap):
    """Per-component pixel counts, bounding boxes and semantic/embedding sums.

    Sums run in float64 over pixels sorted by (component, raster index), so
    they are reproducible and backend independent.
    """
    active = comp >= 0
    cids = comp[active]
    ys, xs = np.nonzero(active)
    count = np.bincount(cids, minlength=n_comp).astype(np.int64)

    order = np.argsort(cids, kind="stable")
    starts = np.searchsorted(cids[order], np.arange(n_comp))
    ys_s = ys[order]
    xs_s = xs[order]
    bbox = np.empty((n_comp, 4), dtype=np.int64)
    bbox[:, 0] = np.minimum.reduceat(ys_s, starts)
    bbox[:, 1] = np.minimum.reduceat(xs_s, starts)
    bbox[:, 2] = np.maximum.reduceat(ys_s, starts)
    bbox[:, 3] = np.maximum.reduceat(xs_s, starts)

    c = semantic.classes
    flat_idx = ys_s * comp.shape[1] + xs_s
    stacked = np.concatenate([semantic.values.reshape(c, -1),
                              embedding.values.reshape(embedding.dim, -1)], axis=0)
    sums = np.add.reduceat(stacked[:, flat_idx].astype(np.float64), starts, axis=1).T
    return count, bbox, np.ascontiguousarray(sums[:, :c]), np.ascontiguousarray(sums[:, c:])


def crossing_edges(comp: np.ndarray, affinity: AffinityMap, n_comp: int):
    """Edges between distinct components with mean crossing-edge affinity.

    Every 4-adjacent pixel pair spanning two components contributes its grid
    affinity; multiple crossings between one component pair are averaged.
    """
    a = affinity.values
    cu_parts = []
    cv_parts = []
    av_parts = []

    cu = comp[:-1, :]
    cv = comp[1:, :]
    mask = (cu >= 0) & (cv >= 0) & (cu != cv)
    cu_parts.append(cu[mask])
    cv_parts.append(cv[mask])
    av_parts.append(a[CH_DOWN, :-1, :][mask].astype(np.float64))

    cu = comp[:, :-1]
    cv = comp[:, 1:]
    mask = (cu >= 0) & (cv >= 0) & (cu != cv)
    cu_parts.append(cu[mask])
    cv_parts.append(cv[mask])
    av_parts.append(a[CH_RIGHT, :, :-1][mask].astype(np.float64))

    pu = np.concatenate(cu_parts)
    pv = np.concatenate(cv_parts)
    pa = np.concatenate(av_parts)
    if pu.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), np.empty(0, dtype=np.float64)

    lo = np.minimum(pu, pv)
    hi = np.maximum(pu, pv)
    key = lo * np.int64(n_comp) + hi
    uniq, inverse = np.unique(key, return_inverse=True)
    sums = np.bincount(inverse, weights=pa, minlength=uniq.size)
    counts = np.bincount(inverse, minlength=uniq.size)
    ea = sums / counts
    eu = (uniq // n_comp).astype(np.int64)
    ev = (uniq % n_comp).astype(np.int64)
    return eu, ev, ea


@dataclass
class LevelGraph:
    """Array-form contraction graph for one pyramid level."""

    comp: np.ndarray        # (h, w) component id per pixel, -1 on background
    n: int
    count: np.ndarray       # (n,)
    bbox: np.ndarray        # (n, 4) y0, x0, y1, x1 inclusive
    sem_sum: np.ndarray     # (n, c)
    emb_sum: np.ndarray     # (n, k)
    edges_u: np.ndarray
    edges_v: np.ndarray
    edges_a: np.ndarray


def build_level_graph(affinity: AffinityMap, semantic: SemanticMap,
                      embedding: EmbeddingMap, seed_labels: np.ndarray) -> LevelGraph:
    """Assemble the array-form graph for one level from its seed labels."""
    if affinity.shape != semantic.shape or affinity.shape != embedding.shape:
        raise InputError("level tensors must share one grid shape")
    if seed_labels.shape != affinity.values.shape[1:]:
        raise InputError("seed labels must match the level shape")
    comp, n_comp, count, bbox, sem_sum, emb_sum, eu, ev, ea = kernels.build_graph(
        seed_labels, affinity.values, semantic.values, embedding.values)
    return LevelGraph(comp, n_comp, count, bbox, sem_sum, emb_sum, eu, ev, ea)
