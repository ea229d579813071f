"""Position-aware segment merging.

After pixel-level contraction, spatially disjoint parts of one object can
only be rejoined at the segment level. Candidate segment pairs are scored
by semantic agreement (one minus the base-2 Jensen-Shannon divergence of
their mean class distributions), embedding similarity (Gaussian kernel of
their mean embeddings) and a geometric damping factor that suppresses
distant pairs. The greedy loop re-derives all three factors from the merged
statistics after every merge.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from .errors import InputError, LogicError
from .graph import Segment
from .losses import LN2, phi

D_PRUNE = 1e-3


def damping(u: Segment, v: Segment, beta: float = 0.5) -> float:
    """Geometric damping in (0, 1]: 1 while the center offsets stay within
    half the larger extent, decaying as a power law beyond it.

    A zero center offset counts as 1 (the cap is already active for any
    offset below half the extent, so 1 is the limit value).
    """
    if beta < 0 or not np.isfinite(beta):
        raise InputError(f"beta must be finite and >= 0, got {beta}")
    (cy_u, cx_u), (cy_v, cx_v) = u.center, v.center
    dy = abs(cy_u - cy_v)
    dx = abs(cx_u - cx_v)
    ty = 1.0 if dy == 0 else min(1.0, 0.5 * max(u.height, v.height) / dy)
    tx = 1.0 if dx == 0 else min(1.0, 0.5 * max(u.width, v.width) / dx)
    return (ty ** beta) * (tx ** beta)


def jensen_shannon_divergence(p, q) -> float:
    """Base-2 Jensen-Shannon divergence between two distributions, in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    with np.errstate(divide="ignore", invalid="ignore"):
        kl_p = np.where(p > 0, p * np.log2(np.where(p > 0, p / m, 1.0)), 0.0)
        kl_q = np.where(q > 0, q * np.log2(np.where(q > 0, q / m, 1.0)), 0.0)
    return float(min(max(0.5 * (kl_p.sum() + kl_q.sum()), 0.0), 1.0))


def segment_affinity(u: Segment, v: Segment) -> tuple[float, float]:
    """(semantic, embedding) affinities of a segment pair, both in [0, 1]."""
    if u.pixel_count < 1 or v.pixel_count < 1:
        raise LogicError("segment affinity needs non-empty segments")
    semantic = 1.0 - jensen_shannon_divergence(u.mean_semantic, v.mean_semantic)
    grouping = phi(u.mean_embedding, v.mean_embedding)
    return semantic, grouping


@dataclass
class MergeResult:
    """Outcome of position-aware merging over an input segment list."""

    groups: list          # list of lists of input indices
    segments: list        # one merged Segment per group, ids = smallest input index


_PAIR_CACHE: dict = {}


def _pair_indices(n: int):
    if n <= 512:
        cached = _PAIR_CACHE.get(n)
        if cached is None:
            cached = np.triu_indices(n, k=1)
            _PAIR_CACHE[n] = cached
        return cached
    return np.triu_indices(n, k=1)


class _SegmentTable:
    """Flat per-segment statistics with one vectorized scoring path.

    The greedy loop scores pairs through this table only, so initial-scan
    scores and post-merge rescans are computed by identical float
    operations.
    """

    def __init__(self, count, bbox, sem, emb, beta: float):
        self.beta = beta
        self.count = np.asarray(count, dtype=np.float64).copy()
        self.bbox = np.asarray(bbox, dtype=np.float64).copy()
        self.sem = np.asarray(sem, dtype=np.float64).copy()
        self.emb = np.asarray(emb, dtype=np.float64).copy()
        n = self.count.size
        self.cls = (np.argmax(self.sem, axis=1) if self.sem.shape[1]
                    else np.zeros(n, dtype=np.int64))

    def merge(self, keep: int, drop: int) -> None:
        self.count[keep] += self.count[drop]
        self.bbox[keep, :2] = np.minimum(self.bbox[keep, :2], self.bbox[drop, :2])
        self.bbox[keep, 2:] = np.maximum(self.bbox[keep, 2:], self.bbox[drop, 2:])
        self.sem[keep] += self.sem[drop]
        self.emb[keep] += self.emb[drop]
        if self.sem.shape[1]:
            self.cls[keep] = int(np.argmax(self.sem[keep]))

    def damping_to(self, i: int, others: np.ndarray) -> np.ndarray:
        b = self.bbox
        cy = 0.5 * (b[:, 0] + b[:, 2])
        cx = 0.5 * (b[:, 1] + b[:, 3])
        hh = b[:, 2] - b[:, 0] + 1.0
        ww = b[:, 3] - b[:, 1] + 1.0
        dy = np.abs(cy[others] - cy[i])
        dx = np.abs(cx[others] - cx[i])
        with np.errstate(divide="ignore"):
            ty = np.where(dy == 0, 1.0,
                          np.minimum(1.0, 0.5 * np.maximum(hh[others], hh[i]) / dy))
            tx = np.where(dx == 0, 1.0,
                          np.minimum(1.0, 0.5 * np.maximum(ww[others], ww[i]) / dx))
        return (ty ** self.beta) * (tx ** self.beta)

    def all_pair_scores(self, full_pairs: bool):
        """Candidate (i, j, score) arrays over every unordered pair at once."""
        n = self.count.size
        iu, ju = _pair_indices(n)
        b = self.bbox
        cy = 0.5 * (b[:, 0] + b[:, 2])
        cx = 0.5 * (b[:, 1] + b[:, 3])
        hh = b[:, 2] - b[:, 0] + 1.0
        ww = b[:, 3] - b[:, 1] + 1.0
        dy = np.abs(cy[iu] - cy[ju])
        dx = np.abs(cx[iu] - cx[ju])
        with np.errstate(divide="ignore"):
            ty = np.where(dy == 0, 1.0,
                          np.minimum(1.0, 0.5 * np.maximum(hh[iu], hh[ju]) / dy))
            tx = np.where(dx == 0, 1.0,
                          np.minimum(1.0, 0.5 * np.maximum(ww[iu], ww[ju]) / dx))
        d = (ty ** self.beta) * (tx ** self.beta)
        if not full_pairs:
            mask = (self.cls[iu] == self.cls[ju]) & (d >= D_PRUNE)
            iu, ju, d = iu[mask], ju[mask], d[mask]
        if iu.size == 0:
            return iu, ju, d
        means = self.sem / self.count[:, None]
        p = means[iu]
        q = means[ju]
        m = 0.5 * (p + q)
        kl = rel_entr(p, m).sum(axis=1) + rel_entr(q, m).sum(axis=1)
        jsd = np.clip(kl / (2.0 * LN2), 0.0, 1.0)
        emb_means = self.emb / self.count[:, None]
        diff = emb_means[iu] - emb_means[ju]
        grouping = np.exp(-LN2 * (diff ** 2).sum(axis=1))
        return iu, ju, (1.0 - jsd) * grouping * d

    def scores_to(self, i: int, others: np.ndarray, d: np.ndarray = None) -> np.ndarray:
        """semantic x embedding x damping against each of ``others``."""
        if d is None:
            d = self.damping_to(i, others)
        p = self.sem[others] / self.count[others, None]
        q = self.sem[i] / self.count[i]
        m = 0.5 * (p + q)
        kl = rel_entr(p, m).sum(axis=1) + rel_entr(q[None, :], m).sum(axis=1)
        jsd = np.clip(kl / (2.0 * LN2), 0.0, 1.0)
        diff = self.emb[others] / self.count[others, None] - self.emb[i] / self.count[i]
        grouping = np.exp(-LN2 * (diff ** 2).sum(axis=1))
        return (1.0 - jsd) * grouping * d

    def segment(self, i: int) -> Segment:
        return Segment(i, int(self.count[i]), tuple(int(b) for b in self.bbox[i]),
                       self.sem[i].copy(), self.emb[i].copy())


def pa_gaec(segments, threshold: float = 0.5, beta: float = 0.5,
            full_pairs: bool = False) -> MergeResult:
    """Greedy position-aware merging over a segment list.

    Candidate pairs share an argmax semantic class and have damping above a
    small floor (distant pairs are weighed down below any useful score);
    ``full_pairs`` scores every pair instead, for correctness testing.
    After each merge the candidate set and all affected scores are rebuilt
    from the merged segment's statistics and geometry.
    """
    segments = list(segments)
    n = len(segments)
    if n == 0:
        return MergeResult(groups=[], segments=[])
    count = np.array([s.pixel_count for s in segments], dtype=np.float64)
    bbox = np.array([s.bbox for s in segments], dtype=np.float64)
    sem = np.stack([s.semantic_sum for s in segments]) if segments[0].semantic_sum.size \
        else np.zeros((n, 0))
    emb = np.stack([s.embedding_sum for s in segments]) if segments[0].embedding_sum.size \
        else np.zeros((n, 0))
    return pa_gaec_arrays(count, bbox, sem, emb, threshold, beta, full_pairs)


def pa_gaec_arrays(count, bbox, sem_sum, emb_sum, threshold: float = 0.5,
                   beta: float = 0.5, full_pairs: bool = False) -> MergeResult:
    """Array-level entry point for ``pa_gaec`` (one row per segment).

    Queue entries carry the statistics version of both endpoints at scoring
    time; merging bumps the survivor's version, which lazily invalidates
    every queued score involving it. After a merge only the survivor's
    candidates are re-scored (one vectorized pass over its class pool).
    """
    if not 0.0 <= threshold <= 1.0:
        raise InputError(f"threshold must lie in [0, 1], got {threshold}")
    n = len(count)
    members = {i: [i] for i in range(n)}
    if n <= 1:
        table = _SegmentTable(count, bbox, sem_sum, emb_sum, beta) if n else None
        return MergeResult(groups=[members[i] for i in range(n)],
                           segments=[table.segment(i) for i in range(n)])

    table = _SegmentTable(count, bbox, sem_sum, emb_sum, beta)
    alive = np.ones(n, dtype=bool)
    stat_ver = np.zeros(n, dtype=np.int64)
    pools: dict[int, set] = {}
    for i in range(n):
        pools.setdefault(0 if full_pairs else int(table.cls[i]), set()).add(i)

    init_i, init_j, init_scores = table.all_pair_scores(full_pairs)
    heap = [(-s, i, j, 0, 0) for i, j, s
            in zip(init_i.tolist(), init_j.tolist(), init_scores.tolist())]
    heapq.heapify(heap)

    def rescan(i: int) -> None:
        pool = pools[0 if full_pairs else int(table.cls[i])]
        others = np.fromiter((t for t in sorted(pool) if t != i), dtype=np.int64,
                             count=len(pool) - 1)
        if others.size == 0:
            return
        d = table.damping_to(i, others)
        chosen = others if full_pairs else others[d >= D_PRUNE]
        if chosen.size == 0:
            return
        scores = table.scores_to(i, chosen,
                                 d if full_pairs else d[d >= D_PRUNE])
        sv_i = int(stat_ver[i])
        for j, s in zip(chosen.tolist(), scores.tolist()):
            if i < j:
                heapq.heappush(heap, (-s, i, j, sv_i, int(stat_ver[j])))
            else:
                heapq.heappush(heap, (-s, j, i, int(stat_ver[j]), sv_i))

    while heap:
        neg_s, u, v, sv_u, sv_v = heap[0]
        if not alive[u] or not alive[v] or stat_ver[u] != sv_u or stat_ver[v] != sv_v:
            heapq.heappop(heap)
            continue
        if -neg_s <= threshold:
            break
        heapq.heappop(heap)
        keep, drop = (u, v) if u < v else (v, u)
        old_cls = 0 if full_pairs else int(table.cls[keep])
        table.merge(keep, drop)
        members[keep].extend(members.pop(drop))
        alive[drop] = False
        pools[0 if full_pairs else int(table.cls[drop])].discard(drop)
        new_cls = 0 if full_pairs else int(table.cls[keep])
        if new_cls != old_cls:
            pools[old_cls].discard(keep)
            pools.setdefault(new_cls, set()).add(keep)
        stat_ver[keep] += 1
        rescan(keep)

    order = [i for i in range(n) if alive[i]]
    return MergeResult(groups=[sorted(members[i]) for i in order],
                       segments=[table.segment(i) for i in order])
