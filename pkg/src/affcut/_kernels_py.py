"""Pure-Python contraction kernels.

Fallback implementations of the two hot loops. The compiled module
``affcut._kernels_cy`` mirrors these bit for bit: both use the same edge
averaging formula, the same (affinity desc, vertex pair asc, version asc)
queue order and the same merged-id policy (the smaller endpoint survives),
so a run produces identical results regardless of which backend is active.
"""

import heapq

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


def gaec_core(n, edges_u, edges_v, affinities, threshold):
    """Greedily contract the max-affinity edge while it exceeds ``threshold``.

    Vertices are ``0..n-1``; ``edges_u[i] < edges_v[i]`` index unique
    undirected edges. Contracting (u, v) keeps ``min(u, v)``; for common
    neighbors the new affinity is the arithmetic mean of the two old ones,
    other neighbors keep theirs. Stale queue entries are skipped via
    per-edge versions (lazy deletion).

    Returns ``(root, fin_u, fin_v, fin_a)``: a representative per input
    vertex plus the surviving edge list sorted by (u, v).
    """
    adj = [dict() for _ in range(n)]
    heap = []
    m = len(edges_u)
    for i in range(m):
        u = int(edges_u[i])
        v = int(edges_v[i])
        a = float(affinities[i])
        adj[u][v] = (a, 0)
        adj[v][u] = (a, 0)
        heap.append((-a, u, v, 0))
    heapq.heapify(heap)

    parent = np.arange(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)

    while heap:
        neg_a, u, v, ver = heapq.heappop(heap)
        if not alive[u] or not alive[v]:
            continue
        cur = adj[u].get(v)
        if cur is None or cur[1] != ver:
            continue
        if -neg_a <= threshold:
            break
        # contract v into u (u < v for every queue entry)
        alive[v] = False
        parent[v] = u
        del adj[u][v]
        moved = adj[v]
        adj[v] = {}
        for t, (a_vt, _) in moved.items():
            if t == u:
                continue
            old = adj[u].get(t)
            if old is not None:
                a_new = 0.5 * (old[0] + a_vt)
                k_new = old[1] + 1
            else:
                a_new = a_vt
                k_new = 0
            adj[u][t] = (a_new, k_new)
            adj[t][u] = (a_new, k_new)
            del adj[t][v]
            if u < t:
                heapq.heappush(heap, (-a_new, u, t, k_new))
            else:
                heapq.heappush(heap, (-a_new, t, u, k_new))

    for i in range(n):
        r = int(parent[i])
        while parent[r] != r:
            r = int(parent[r])
        j = i
        while parent[j] != r:
            parent[j], j = r, int(parent[j])

    fu, fv, fa = [], [], []
    for u in range(n):
        if not alive[u]:
            continue
        for t, (a, _) in adj[u].items():
            if t > u:
                fu.append(u)
                fv.append(t)
                fa.append(a)
    fin_u = np.asarray(fu, dtype=np.int64)
    fin_v = np.asarray(fv, dtype=np.int64)
    fin_a = np.asarray(fa, dtype=np.float64)
    if fin_u.size:
        order = np.lexsort((fin_v, fin_u))
        fin_u, fin_v, fin_a = fin_u[order], fin_v[order], fin_a[order]
    return parent, fin_u, fin_v, fin_a


def label_components(seeds):
    """4-connected components of equal positive seed ids.

    ``seeds``: int32 map with 0 = excluded, -1 = active singleton pixel,
    positive = seed id (same-id 4-neighbors join one component). Returns
    (component map with -1 on excluded pixels, component count); component
    ids are dense and ordered by each component's first raster pixel, which
    makes the numbering backend independent.
    """
    active = seeds != 0
    n_active = int(active.sum())
    comp = np.full(seeds.shape, -1, dtype=np.int64)
    if n_active == 0:
        return comp, 0
    index = np.full(seeds.shape, -1, dtype=np.int64)
    index[active] = np.arange(n_active)

    down = active[:-1, :] & active[1:, :] & (seeds[:-1, :] == seeds[1:, :]) \
        & (seeds[:-1, :] > 0)
    right = active[:, :-1] & active[:, 1:] & (seeds[:, :-1] == seeds[:, 1:]) \
        & (seeds[:, :-1] > 0)
    rows = np.concatenate([index[:-1, :][down], index[:, :-1][right]])
    cols = np.concatenate([index[1:, :][down], index[:, 1:][right]])
    graph = sparse.coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)),
                              shape=(n_active, n_active))
    _, raw = csgraph.connected_components(graph, directed=False)

    # canonical numbering: order components by first occurrence in raster order
    uniq, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(uniq.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(uniq.size)
    comp[active] = rank[inverse]
    return comp, int(uniq.size)


def build_graph(seeds, affinity, semantic, embedding):
    """Level-graph construction: components, statistics and crossing edges.

    One call per pyramid level. Components follow ``label_components``.
    Per component: pixel count, inclusive bbox, float64 semantic/embedding
    sums accumulated in raster order. Edges join distinct 4-adjacent
    components; parallel crossing affinities are averaged (down edges
    accumulate before right edges, in raster order). Edge lists are sorted
    by (u, v). The compiled backend mirrors every accumulation order, so
    results are bit-identical.
    """
    comp, n_comp = label_components(seeds)
    count = np.zeros(0, dtype=np.int64)
    c = semantic.shape[0]
    k = embedding.shape[0]
    if n_comp == 0:
        return (comp, 0, count, np.empty((0, 4), np.int64), np.empty((0, c)),
                np.empty((0, k)), np.empty(0, np.int64), np.empty(0, np.int64),
                np.empty(0, np.float64))

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

    flat_idx = ys_s * comp.shape[1] + xs_s
    stacked = np.concatenate([semantic.reshape(c, -1), embedding.reshape(k, -1)], axis=0)
    sums = np.add.reduceat(stacked[:, flat_idx].astype(np.float64), starts, axis=1).T
    sem_sum = np.ascontiguousarray(sums[:, :c])
    emb_sum = np.ascontiguousarray(sums[:, c:])

    cu_parts, cv_parts, av_parts = [], [], []
    cu = comp[:-1, :]
    cv = comp[1:, :]
    mask = (cu >= 0) & (cv >= 0) & (cu != cv)
    cu_parts.append(cu[mask])
    cv_parts.append(cv[mask])
    av_parts.append(affinity[1, :-1, :][mask].astype(np.float64))
    cu = comp[:, :-1]
    cv = comp[:, 1:]
    mask = (cu >= 0) & (cv >= 0) & (cu != cv)
    cu_parts.append(cu[mask])
    cv_parts.append(cv[mask])
    av_parts.append(affinity[3, :, :-1][mask].astype(np.float64))

    pu = np.concatenate(cu_parts)
    pv = np.concatenate(cv_parts)
    pa = np.concatenate(av_parts)
    if pu.size == 0:
        eu = np.empty(0, dtype=np.int64)
        return comp, n_comp, count, bbox, sem_sum, emb_sum, eu, eu.copy(), \
            np.empty(0, np.float64)
    lo = np.minimum(pu, pv)
    hi = np.maximum(pu, pv)
    key = lo * np.int64(n_comp) + hi
    uniq, inverse = np.unique(key, return_inverse=True)
    sums = np.bincount(inverse, weights=pa, minlength=uniq.size)
    counts = np.bincount(inverse, minlength=uniq.size)
    ea = sums / counts
    eu = (uniq // n_comp).astype(np.int64)
    ev = (uniq % n_comp).astype(np.int64)
    return comp, n_comp, count, bbox, sem_sum, emb_sum, eu, ev, ea


def gas_sweep(labels, affinity, order, threshold):
    """One label-propagation sweep over ``order`` (flat pixel indices).

    A pixel adopts the label of its max-affinity already-labeled 4-neighbor
    when that affinity strictly exceeds ``threshold``. Writes are visible to
    later pixels within the same sweep. Returns the number of assignments.
    """
    h, w = labels.shape
    assigned = 0
    for f in order:
        f = int(f)
        y, x = divmod(f, w)
        best_a = -1.0
        best_lab = 0
        if y > 0:
            lab = labels[y - 1, x]
            if lab > 0:
                a = float(affinity[0, y, x])
                if a > best_a:
                    best_a = a
                    best_lab = lab
        if y < h - 1:
            lab = labels[y + 1, x]
            if lab > 0:
                a = float(affinity[1, y, x])
                if a > best_a:
                    best_a = a
                    best_lab = lab
        if x > 0:
            lab = labels[y, x - 1]
            if lab > 0:
                a = float(affinity[2, y, x])
                if a > best_a:
                    best_a = a
                    best_lab = lab
        if x < w - 1:
            lab = labels[y, x + 1]
            if lab > 0:
                a = float(affinity[3, y, x])
                if a > best_a:
                    best_a = a
                    best_lab = lab
        if best_lab > 0 and best_a > threshold:
            labels[y, x] = best_lab
            assigned += 1
    return assigned


def id_stats(labels, semantic, embedding, n_ids):
    """Per-id pixel counts, bboxes and float64 tensor sums for ids >= 1.

    Row ``i`` describes label id ``i`` (row 0 is unused). Sums accumulate in
    raster order per id, matching the compiled backend bit for bit. The
    bbox rows of absent ids are zeroed.
    """
    count = np.zeros(n_ids, dtype=np.int64)
    bbox = np.zeros((n_ids, 4), dtype=np.int64)
    c = semantic.shape[0]
    k = embedding.shape[0]
    sem_sum = np.zeros((n_ids, c), dtype=np.float64)
    emb_sum = np.zeros((n_ids, k), dtype=np.float64)
    active = labels > 0
    if not active.any():
        return count, bbox, sem_sum, emb_sum
    ids = labels[active]
    ys, xs = np.nonzero(active)
    count[: ids.max() + 1] = np.bincount(ids)[: ids.max() + 1]
    order = np.argsort(ids, kind="stable")
    sorted_ids = ids[order]
    uniq, starts = np.unique(sorted_ids, return_index=True)
    ys_s = ys[order]
    xs_s = xs[order]
    bbox[uniq, 0] = np.minimum.reduceat(ys_s, starts)
    bbox[uniq, 1] = np.minimum.reduceat(xs_s, starts)
    bbox[uniq, 2] = np.maximum.reduceat(ys_s, starts)
    bbox[uniq, 3] = np.maximum.reduceat(xs_s, starts)
    flat_idx = ys_s * labels.shape[1] + xs_s
    stacked = np.concatenate([semantic.reshape(c, -1), embedding.reshape(k, -1)], axis=0)
    sums = np.add.reduceat(stacked[:, flat_idx].astype(np.float64), starts, axis=1).T
    sem_sum[uniq] = sums[:, :c]
    emb_sum[uniq] = sums[:, c:]
    return count, bbox, sem_sum, emb_sum
