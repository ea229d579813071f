"""Shared builders for the test suite."""

import numpy as np
import pytest

from affcut import AffinityMap, EmbeddingMap, LabelMap, SemanticMap
from affcut.graph import Segment, bare_graph


def grid_maps(h, w, affinity=0.9, classes=1, dim=1):
    """Uniform level tensors: constant affinities, flat semantics, zero embeddings."""
    aff = np.zeros((4, h, w), dtype=np.float32)
    aff[1, :-1, :] = affinity
    aff[0, 1:, :] = affinity
    aff[3, :, :-1] = affinity
    aff[2, :, 1:] = affinity
    sem = np.full((classes, h, w), 1.0 / classes, dtype=np.float32)
    emb = np.zeros((dim, h, w), dtype=np.float32)
    return AffinityMap(aff), SemanticMap(sem), EmbeddingMap(emb)


def affinity_from_edges(h, w, edge_affinity):
    """Affinity map from {((y,x),(y2,x2)): a} over 4-adjacent pixel pairs."""
    aff = np.zeros((4, h, w), dtype=np.float32)
    for ((y, x), (y2, x2)), a in edge_affinity.items():
        if (y2, x2) == (y + 1, x):
            aff[1, y, x] = a
            aff[0, y2, x2] = a
        elif (y2, x2) == (y, x + 1):
            aff[3, y, x] = a
            aff[2, y2, x2] = a
        else:
            raise ValueError(f"not a down/right pair: {(y, x)} -> {(y2, x2)}")
    return AffinityMap(aff)


def random_graph(rng, n_range=(2, 12), edge_prob=0.5, quantized=True):
    """Random bare contraction graph; quantized affinities force ties."""
    n = int(rng.integers(*n_range))
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < edge_prob:
                a = int(rng.integers(0, 11)) / 10.0 if quantized else float(rng.random())
                edges.append((u, v, a))
    return n, edges, bare_graph(n, edges)


def unit_segment(sid, y0, x0, y1, x1, count=1, sem=None, emb=None):
    return Segment(sid, count, (y0, x0, y1, x1),
                   np.asarray(sem if sem is not None else [], dtype=float),
                   np.asarray(emb if emb is not None else [], dtype=float))
