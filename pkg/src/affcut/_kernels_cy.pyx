# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled contraction kernels.

Mirrors ``affcut._kernels_py`` exactly: same averaging formula, same queue
ordering (affinity desc, vertex pair asc, version asc) and same merged-id
policy, so switching backends never changes results.
"""

from cython.operator cimport dereference as deref, preincrement as inc
from libcpp.algorithm cimport sort
from libcpp.pair cimport pair
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

import numpy as np

ctypedef long long i64
ctypedef pair[double, i64] edge_val
ctypedef unordered_map[i64, edge_val] adj_map


cdef inline bint _before(double a1, i64 u1, i64 v1, i64 k1,
                         double a2, i64 u2, i64 v2, i64 k2) noexcept nogil:
    # queue order: affinity descending, then (u, v, version) ascending
    if a1 != a2:
        return a1 > a2
    if u1 != u2:
        return u1 < u2
    if v1 != v2:
        return v1 < v2
    return k1 < k2


cdef inline void _swap(vector[double]& ha, vector[i64]& hu, vector[i64]& hv,
                       vector[i64]& hk, size_t i, size_t j) noexcept nogil:
    cdef double ta = ha[i]
    cdef i64 tu = hu[i], tv = hv[i], tk = hk[i]
    ha[i] = ha[j]; hu[i] = hu[j]; hv[i] = hv[j]; hk[i] = hk[j]
    ha[j] = ta; hu[j] = tu; hv[j] = tv; hk[j] = tk


cdef void _hpush(vector[double]& ha, vector[i64]& hu, vector[i64]& hv,
                 vector[i64]& hk, double a, i64 u, i64 v, i64 k) noexcept nogil:
    cdef size_t i = ha.size(), p
    ha.push_back(a); hu.push_back(u); hv.push_back(v); hk.push_back(k)
    while i > 0:
        p = (i - 1) >> 1
        if _before(ha[i], hu[i], hv[i], hk[i], ha[p], hu[p], hv[p], hk[p]):
            _swap(ha, hu, hv, hk, i, p)
            i = p
        else:
            break


cdef void _hpop(vector[double]& ha, vector[i64]& hu, vector[i64]& hv,
                vector[i64]& hk) noexcept nogil:
    cdef size_t n = ha.size() - 1, i = 0, l, r, best
    _swap(ha, hu, hv, hk, 0, n)
    ha.pop_back(); hu.pop_back(); hv.pop_back(); hk.pop_back()
    while True:
        l = 2 * i + 1
        r = l + 1
        best = i
        if l < n and _before(ha[l], hu[l], hv[l], hk[l], ha[best], hu[best], hv[best], hk[best]):
            best = l
        if r < n and _before(ha[r], hu[r], hv[r], hk[r], ha[best], hu[best], hv[best], hk[best]):
            best = r
        if best == i:
            break
        _swap(ha, hu, hv, hk, i, best)
        i = best


def gaec_core(i64 n, i64[::1] edges_u, i64[::1] edges_v, double[::1] affinities,
              double threshold):
    """See ``affcut._kernels_py.gaec_core``."""
    cdef vector[adj_map] adj
    adj.resize(n)
    cdef vector[double] ha
    cdef vector[i64] hu, hv, hk

    parent_arr = np.arange(n, dtype=np.int64)
    alive_arr = np.ones(n, dtype=np.uint8)
    cdef i64[::1] parent = parent_arr
    cdef unsigned char[::1] alive = alive_arr

    cdef Py_ssize_t m = edges_u.shape[0], i
    cdef i64 u, v, t, ver, k_new, j, r
    cdef double a, a_vt, a_new, top_a
    cdef adj_map.iterator it, hit

    for i in range(m):
        u = edges_u[i]
        v = edges_v[i]
        a = affinities[i]
        adj[u][v] = edge_val(a, 0)
        adj[v][u] = edge_val(a, 0)
        _hpush(ha, hu, hv, hk, a, u, v, 0)

    while ha.size() > 0:
        top_a = ha[0]; u = hu[0]; v = hv[0]; ver = hk[0]
        _hpop(ha, hu, hv, hk)
        if alive[u] == 0 or alive[v] == 0:
            continue
        hit = adj[u].find(v)
        if hit == adj[u].end() or deref(hit).second.second != ver:
            continue
        if top_a <= threshold:
            break
        alive[v] = 0
        parent[v] = u
        adj[u].erase(v)
        it = adj[v].begin()
        while it != adj[v].end():
            t = deref(it).first
            a_vt = deref(it).second.first
            inc(it)
            if t == u:
                continue
            hit = adj[u].find(t)
            if hit != adj[u].end():
                a_new = 0.5 * (deref(hit).second.first + a_vt)
                k_new = deref(hit).second.second + 1
            else:
                a_new = a_vt
                k_new = 0
            adj[u][t] = edge_val(a_new, k_new)
            adj[t][u] = edge_val(a_new, k_new)
            adj[t].erase(v)
            if u < t:
                _hpush(ha, hu, hv, hk, a_new, u, t, k_new)
            else:
                _hpush(ha, hu, hv, hk, a_new, t, u, k_new)
        adj[v].clear()

    for i in range(n):
        r = parent[i]
        while parent[r] != r:
            r = parent[r]
        j = i
        while parent[j] != r:
            t = parent[j]
            parent[j] = r
            j = t

    fu, fv, fa = [], [], []
    for i in range(n):
        if alive[i] == 0:
            continue
        it = adj[i].begin()
        while it != adj[i].end():
            t = deref(it).first
            if t > i:
                fu.append(i)
                fv.append(t)
                fa.append(deref(it).second.first)
            inc(it)
    fin_u = np.asarray(fu, dtype=np.int64)
    fin_v = np.asarray(fv, dtype=np.int64)
    fin_a = np.asarray(fa, dtype=np.float64)
    if fin_u.size:
        order = np.lexsort((fin_v, fin_u))
        fin_u, fin_v, fin_a = fin_u[order], fin_v[order], fin_a[order]
    return parent_arr, fin_u, fin_v, fin_a


cdef inline i64 _find(i64[::1] parent, i64 i) noexcept nogil:
    cdef i64 r = i, t
    while parent[r] != r:
        r = parent[r]
    while parent[i] != r:
        t = parent[i]
        parent[i] = r
        i = t
    return r


cdef inline void _union(i64[::1] parent, i64 a, i64 b) noexcept nogil:
    cdef i64 ra = _find(parent, a), rb = _find(parent, b)
    if ra == rb:
        return
    if ra < rb:
        parent[rb] = ra
    else:
        parent[ra] = rb


def label_components(int[:, ::1] seeds):
    """See ``affcut._kernels_py.label_components``."""
    cdef Py_ssize_t h = seeds.shape[0], w = seeds.shape[1]
    cdef Py_ssize_t n = h * w, y, x
    cdef i64 i, r, next_id = 0
    cdef int s

    parent_arr = np.empty(n, dtype=np.int64)
    cdef i64[::1] parent = parent_arr
    for y in range(h):
        for x in range(w):
            i = y * w + x
            parent[i] = i if seeds[y, x] != 0 else -1

    for y in range(h):
        for x in range(w):
            s = seeds[y, x]
            if s <= 0:
                continue
            i = y * w + x
            if y > 0 and seeds[y - 1, x] == s:
                _union(parent, i, i - w)
            if x > 0 and seeds[y, x - 1] == s:
                _union(parent, i, i - 1)

    comp_arr = np.full((h, w), -1, dtype=np.int64)
    cdef i64[:, ::1] comp = comp_arr
    id_arr = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] id_of = id_arr
    for y in range(h):
        for x in range(w):
            i = y * w + x
            if parent[i] < 0:
                continue
            r = _find(parent, i)
            if id_of[r] < 0:
                id_of[r] = next_id
                next_id += 1
            comp[y, x] = id_of[r]
    return comp_arr, int(next_id)


def build_graph(int[:, ::1] seeds, float[:, :, ::1] affinity,
                float[:, :, ::1] semantic, float[:, :, ::1] embedding):
    """See ``affcut._kernels_py.build_graph`` (bit-identical mirror)."""
    cdef Py_ssize_t h = seeds.shape[0], w = seeds.shape[1]
    cdef Py_ssize_t n = h * w, y, x, ch
    cdef Py_ssize_t c = semantic.shape[0], k = embedding.shape[0]
    cdef i64 i, r, next_id = 0, a, b, cid, lo, hi, key
    cdef int s

    parent_arr = np.empty(n, dtype=np.int64)
    cdef i64[::1] parent = parent_arr
    for y in range(h):
        for x in range(w):
            i = y * w + x
            parent[i] = i if seeds[y, x] != 0 else -1
    for y in range(h):
        for x in range(w):
            s = seeds[y, x]
            if s <= 0:
                continue
            i = y * w + x
            if y > 0 and seeds[y - 1, x] == s:
                _union(parent, i, i - w)
            if x > 0 and seeds[y, x - 1] == s:
                _union(parent, i, i - 1)

    comp_arr = np.full((h, w), -1, dtype=np.int64)
    cdef i64[:, ::1] comp = comp_arr
    id_arr = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] id_of = id_arr
    for y in range(h):
        for x in range(w):
            i = y * w + x
            if parent[i] < 0:
                continue
            r = _find(parent, i)
            if id_of[r] < 0:
                id_of[r] = next_id
                next_id += 1
            comp[y, x] = id_of[r]
    cdef i64 n_comp = next_id
    if n_comp == 0:
        empty_i = np.empty(0, dtype=np.int64)
        return (comp_arr, 0, np.zeros(0, dtype=np.int64), np.empty((0, 4), np.int64),
                np.empty((0, c)), np.empty((0, k)), empty_i, np.empty(0, np.int64),
                np.empty(0, np.float64))

    count_arr = np.zeros(n_comp, dtype=np.int64)
    bbox_arr = np.empty((n_comp, 4), dtype=np.int64)
    sem_arr = np.zeros((n_comp, c), dtype=np.float64)
    emb_arr = np.zeros((n_comp, k), dtype=np.float64)
    cdef i64[::1] count = count_arr
    cdef i64[:, ::1] bbox = bbox_arr
    cdef double[:, ::1] sem_sum = sem_arr
    cdef double[:, ::1] emb_sum = emb_arr
    for y in range(h):
        for x in range(w):
            cid = comp[y, x]
            if cid < 0:
                continue
            if count[cid] == 0:
                bbox[cid, 0] = y
                bbox[cid, 1] = x
                bbox[cid, 2] = y
                bbox[cid, 3] = x
            else:
                if y < bbox[cid, 0]:
                    bbox[cid, 0] = y
                if x < bbox[cid, 1]:
                    bbox[cid, 1] = x
                if y > bbox[cid, 2]:
                    bbox[cid, 2] = y
                if x > bbox[cid, 3]:
                    bbox[cid, 3] = x
            count[cid] += 1
            for ch in range(c):
                sem_sum[cid, ch] += <double>semantic[ch, y, x]
            for ch in range(k):
                emb_sum[cid, ch] += <double>embedding[ch, y, x]

    # crossing edges: down pass then right pass, both raster order; a stable
    # sort by key then groups parallel crossings in their encounter order,
    # matching the vectorized fallback's accumulation bit for bit
    cdef vector[pair[i64, i64]] tagged   # (pair key, encounter index)
    cdef vector[double] vals
    for y in range(h - 1):
        for x in range(w):
            a = comp[y, x]
            b = comp[y + 1, x]
            if a < 0 or b < 0 or a == b:
                continue
            lo = a if a < b else b
            hi = b if a < b else a
            tagged.push_back(pair[i64, i64](lo * n_comp + hi, <i64>vals.size()))
            vals.push_back(<double>affinity[1, y, x])
    for y in range(h):
        for x in range(w - 1):
            a = comp[y, x]
            b = comp[y, x + 1]
            if a < 0 or b < 0 or a == b:
                continue
            lo = a if a < b else b
            hi = b if a < b else a
            tagged.push_back(pair[i64, i64](lo * n_comp + hi, <i64>vals.size()))
            vals.push_back(<double>affinity[3, y, x])

    sort(tagged.begin(), tagged.end())
    cdef Py_ssize_t m_cross = tagged.size(), pos = 0
    cdef Py_ssize_t m = 0
    while pos < m_cross:
        key = tagged[pos].first
        while pos < m_cross and tagged[pos].first == key:
            pos += 1
        m += 1
    eu_arr = np.empty(m, dtype=np.int64)
    ev_arr = np.empty(m, dtype=np.int64)
    ea_arr = np.empty(m, dtype=np.float64)
    cdef i64[::1] eu = eu_arr
    cdef i64[::1] ev = ev_arr
    cdef double[::1] ea = ea_arr
    cdef double total
    cdef i64 n_par
    cdef Py_ssize_t out = 0
    pos = 0
    while pos < m_cross:
        key = tagged[pos].first
        total = 0.0
        n_par = 0
        while pos < m_cross and tagged[pos].first == key:
            total += vals[tagged[pos].second]
            n_par += 1
            pos += 1
        eu[out] = key // n_comp
        ev[out] = key % n_comp
        ea[out] = total / <double>n_par
        out += 1
    return (comp_arr, int(n_comp), count_arr, bbox_arr, sem_arr, emb_arr,
            eu_arr, ev_arr, ea_arr)


def id_stats(int[:, ::1] labels, float[:, :, ::1] semantic,
             float[:, :, ::1] embedding, i64 n_ids):
    """See ``affcut._kernels_py.id_stats`` (bit-identical mirror)."""
    cdef Py_ssize_t h = labels.shape[0], w = labels.shape[1], y, x, ch
    cdef Py_ssize_t c = semantic.shape[0], k = embedding.shape[0]
    cdef int sid
    count_arr = np.zeros(n_ids, dtype=np.int64)
    bbox_arr = np.zeros((n_ids, 4), dtype=np.int64)
    sem_arr = np.zeros((n_ids, c), dtype=np.float64)
    emb_arr = np.zeros((n_ids, k), dtype=np.float64)
    cdef i64[::1] count = count_arr
    cdef i64[:, ::1] bbox = bbox_arr
    cdef double[:, ::1] sem_sum = sem_arr
    cdef double[:, ::1] emb_sum = emb_arr
    for y in range(h):
        for x in range(w):
            sid = labels[y, x]
            if sid <= 0:
                continue
            if count[sid] == 0:
                bbox[sid, 0] = y
                bbox[sid, 1] = x
                bbox[sid, 2] = y
                bbox[sid, 3] = x
            else:
                if y < bbox[sid, 0]:
                    bbox[sid, 0] = y
                if x < bbox[sid, 1]:
                    bbox[sid, 1] = x
                if y > bbox[sid, 2]:
                    bbox[sid, 2] = y
                if x > bbox[sid, 3]:
                    bbox[sid, 3] = x
            count[sid] += 1
            for ch in range(c):
                sem_sum[sid, ch] += <double>semantic[ch, y, x]
            for ch in range(k):
                emb_sum[sid, ch] += <double>embedding[ch, y, x]
    return count_arr, bbox_arr, sem_arr, emb_arr


def gas_sweep(int[:, ::1] labels, float[:, :, ::1] affinity, i64[::1] order,
              double threshold):
    """See ``affcut._kernels_py.gas_sweep``."""
    cdef Py_ssize_t h = labels.shape[0], w = labels.shape[1]
    cdef Py_ssize_t i, y, x
    cdef i64 f
    cdef int lab, best_lab
    cdef double a, best_a
    cdef long assigned = 0
    for i in range(order.shape[0]):
        f = order[i]
        y = f // w
        x = f - y * w
        best_a = -1.0
        best_lab = 0
        if y > 0:
            lab = labels[y - 1, x]
            if lab > 0:
                a = <double>affinity[0, y, x]
                if a > best_a:
                    best_a = a
                    best_lab = lab
        if y < h - 1:
            lab = labels[y + 1, x]
            if lab > 0:
                a = <double>affinity[1, y, x]
                if a > best_a:
                    best_a = a
                    best_lab = lab
        if x > 0:
            lab = labels[y, x - 1]
            if lab > 0:
                a = <double>affinity[2, y, x]
                if a > best_a:
                    best_a = a
                    best_lab = lab
        if x < w - 1:
            lab = labels[y, x + 1]
            if lab > 0:
                a = <double>affinity[3, y, x]
                if a > best_a:
                    best_a = a
                    best_lab = lab
        if best_lab > 0 and best_a > threshold:
            labels[y, x] = best_lab
            assigned += 1
    return assigned
