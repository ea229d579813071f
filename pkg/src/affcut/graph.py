"""Segment bookkeeping and the mutable contraction graph.

The graph stores live segments, a symmetric adjacency with one affinity per
edge, and a lazily-invalidated max-priority queue. ``Q.remove`` from the
greedy contraction loop is honored semantically through per-edge versions:
stale queue entries are skipped on pop instead of being deleted in place.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .construct import build_level_graph, participation_mask
from .errors import InputError, LogicError
from .types import (BACKGROUND, UNLABELED, AffinityMap, EmbeddingMap, LabelMap,
                    SemanticMap)


@dataclass
class Segment:
    """A contracted vertex: pixel statistics of everything merged into it.

    ``bbox`` is (y0, x0, y1, x1) inclusive; the center is the bounding-box
    center and height/width are the bbox extents, which keeps merging O(1).
    Pixel membership is tracked by the per-pixel label map, not here.
    """

    id: int
    pixel_count: int
    bbox: tuple[int, int, int, int]
    semantic_sum: np.ndarray
    embedding_sum: np.ndarray

    def __post_init__(self):
        self.semantic_sum = np.asarray(self.semantic_sum, dtype=np.float64)
        self.embedding_sum = np.asarray(self.embedding_sum, dtype=np.float64)
        if self.pixel_count < 1:
            raise InputError("segments must contain at least one pixel")

    @property
    def center(self) -> tuple[float, float]:
        y0, x0, y1, x1 = self.bbox
        return (0.5 * (y0 + y1), 0.5 * (x0 + x1))

    @property
    def height(self) -> int:
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def width(self) -> int:
        return self.bbox[3] - self.bbox[1] + 1

    @property
    def mean_semantic(self) -> np.ndarray:
        return self.semantic_sum / self.pixel_count

    @property
    def mean_embedding(self) -> np.ndarray:
        return self.embedding_sum / self.pixel_count

    def validate(self) -> None:
        y0, x0, y1, x1 = self.bbox
        if y1 < y0 or x1 < x0:
            raise InputError(f"segment {self.id} has an empty bbox")
        if self.semantic_sum.size:
            total = float(self.mean_semantic.sum())
            if abs(total - 1.0) > 1e-4:
                raise InputError(
                    f"segment {self.id} mean distribution sums to {total}, expected 1")

    @staticmethod
    def combine(a: "Segment", b: "Segment", merged_id: int) -> "Segment":
        ay0, ax0, ay1, ax1 = a.bbox
        by0, bx0, by1, bx1 = b.bbox
        return Segment(
            id=merged_id,
            pixel_count=a.pixel_count + b.pixel_count,
            bbox=(min(ay0, by0), min(ax0, bx0), max(ay1, by1), max(ax1, bx1)),
            semantic_sum=a.semantic_sum + b.semantic_sum,
            embedding_sum=a.embedding_sum + b.embedding_sum,
        )


class ContractionGraph:
    """Weighted undirected graph over segments with a lazy max-queue.

    Queue entries are ``(-affinity, u, v, version)`` tuples, so ties are
    broken toward the smallest ordered vertex pair. Contracting keeps the
    smaller endpoint id alive.
    """

    def __init__(self):
        self.segments: dict[int, Segment] = {}
        self._adj: dict[int, dict[int, float]] = {}
        self._ver: dict[tuple[int, int], int] = {}
        self._heap: list[tuple[float, int, int, int]] = []
        self._members: dict[int, list[int]] = {}

    # -- construction -----------------------------------------------------
    def add_segment(self, segment: Segment) -> None:
        if segment.id in self.segments:
            raise InputError(f"duplicate segment id {segment.id}")
        self.segments[segment.id] = segment
        self._adj[segment.id] = {}
        self._members[segment.id] = [segment.id]

    def add_edge(self, u: int, v: int, affinity: float) -> None:
        if u == v:
            raise InputError("self-loops are not allowed")
        if u not in self.segments or v not in self.segments:
            raise InputError(f"edge ({u}, {v}) references an unknown segment")
        if not 0.0 <= affinity <= 1.0:
            raise InputError(f"affinity must lie in [0, 1], got {affinity}")
        if v in self._adj[u]:
            raise InputError(f"edge ({u}, {v}) already exists")
        self._set_edge(u, v, float(affinity))

    def _set_edge(self, u: int, v: int, affinity: float) -> None:
        self._adj[u][v] = affinity
        self._adj[v][u] = affinity
        key = (u, v) if u < v else (v, u)
        ver = self._ver.get(key, -1) + 1
        self._ver[key] = ver
        heapq.heappush(self._heap, (-affinity, key[0], key[1], ver))

    # -- queries ----------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.segments)

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self._adj.values()) // 2

    def affinity(self, u: int, v: int):
        return self._adj.get(u, {}).get(v)

    def neighbors(self, u: int):
        return self._adj[u].keys()

    def edges(self):
        for u, nbrs in self._adj.items():
            for v, a in nbrs.items():
                if u < v:
                    yield u, v, a

    def best_edge(self):
        """Highest-affinity live edge as (affinity, u, v), or None."""
        while self._heap:
            neg_a, u, v, ver = self._heap[0]
            if self._ver.get((u, v)) == ver and u in self.segments and v in self._adj.get(u, {}):
                return -neg_a, u, v
            heapq.heappop(self._heap)
        return None

    def members(self, u: int) -> list[int]:
        return list(self._members[u])

    def partition(self) -> list[frozenset]:
        """Current grouping of the originally added segment ids."""
        return [frozenset(self._members[u]) for u in sorted(self.segments)]

    # -- mutation ----------------------------------------------------------
    def contract(self, u: int, v: int) -> int:
        """Merge edge (u, v); returns the surviving vertex id (min(u, v)).

        Statistics add component-wise with a bbox hull. Common neighbors get
        the arithmetic mean of the two old affinities, other neighbors keep
        theirs.
        """
        if self.affinity(u, v) is None:
            raise LogicError(f"cannot contract missing edge ({u}, {v})")
        keep, drop = (u, v) if u < v else (v, u)
        self.segments[keep] = Segment.combine(self.segments[keep], self.segments[drop], keep)
        self._members[keep].extend(self._members.pop(drop))

        del self._adj[keep][drop]
        moved = self._adj.pop(drop)
        for t, a_dt in moved.items():
            if t == keep:
                continue
            old = self._adj[keep].get(t)
            new_a = 0.5 * (old + a_dt) if old is not None else a_dt
            del self._adj[t][drop]
            self._adj[keep].pop(t, None)
            self._set_edge(keep, t, new_a)
        del self.segments[drop]
        return keep

    def apply_roots(self, ids: list[int], root: np.ndarray, fin_u, fin_v, fin_a) -> None:
        """Rebuild the graph from a kernel result (root per index into ids)."""
        groups: dict[int, list[int]] = {}
        for idx, r in enumerate(root):
            groups.setdefault(int(r), []).append(idx)
        merged: dict[int, Segment] = {}
        members: dict[int, list[int]] = {}
        for r in sorted(groups):
            gids = [ids[i] for i in groups[r]]
            seg = self.segments[gids[0]]
            mem = list(self._members[gids[0]])
            for gid in gids[1:]:
                seg = Segment.combine(seg, self.segments[gid], seg.id)
                mem.extend(self._members[gid])
            merged[ids[r]] = Segment(ids[r], seg.pixel_count, seg.bbox,
                                     seg.semantic_sum, seg.embedding_sum)
            members[ids[r]] = mem
        self.segments = merged
        self._members = members
        self._adj = {sid: {} for sid in merged}
        self._ver = {}
        self._heap = []
        for i in range(len(fin_u)):
            self._set_edge(ids[int(fin_u[i])], ids[int(fin_v[i])], float(fin_a[i]))


def build_pixel_graph(affinity: AffinityMap, semantic: SemanticMap,
                      embedding: EmbeddingMap, seed_labels: LabelMap, class_kinds,
                      background_mode: str = "argmax",
                      background_min_prob: float = 0.5) -> ContractionGraph:
    """Build the pixel-level graph for one level.

    Vertices: one per UNLABELED participating pixel plus one per connected
    region of each positive seed id. Pixels marked BACKGROUND in the seeds
    or classified as background by the semantic map are excluded. Edges
    connect 4-adjacent vertices; when several grid edges cross the same
    vertex pair their affinities are averaged.
    """
    if seed_labels.shape != affinity.shape:
        raise InputError("seed labels must match the level shape")
    part = participation_mask(semantic, class_kinds, background_mode, background_min_prob)
    seeds = np.where(part, seed_labels.labels, np.int32(BACKGROUND))
    lg = build_level_graph(affinity, semantic, embedding, seeds)
    g = ContractionGraph()
    for i in range(lg.n):
        g.add_segment(Segment(
            id=i,
            pixel_count=int(lg.count[i]),
            bbox=tuple(int(b) for b in lg.bbox[i]),
            semantic_sum=lg.sem_sum[i],
            embedding_sum=lg.emb_sum[i],
        ))
    for i in range(len(lg.edges_u)):
        g.add_edge(int(lg.edges_u[i]), int(lg.edges_v[i]), float(lg.edges_a[i]))
    return g


def bare_graph(n: int, edges) -> ContractionGraph:
    """Graph over featureless unit vertices 0..n-1 (for cost experiments)."""
    g = ContractionGraph()
    empty = np.empty(0, dtype=np.float64)
    for i in range(n):
        g.add_segment(Segment(i, 1, (0, 0, 0, 0), empty, empty))
    for u, v, a in edges:
        g.add_edge(int(u), int(v), float(a))
    return g
