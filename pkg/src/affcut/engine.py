"""The greedy contraction loop and multicut cost accounting.

``gaec`` repeatedly contracts the maximum-affinity edge while it strictly
exceeds the threshold (edges exactly at the threshold stay cut). Costs for
comparing against the exact solver use the logit map, under which the 0.5
affinity threshold corresponds to cost 0.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import InputError
from .graph import ContractionGraph

# logit clip: affinities in [1e-6, 1 - 1e-6], costs in +-13.8155
_AFFINITY_EPS = 1e-6
COST_CAP = math.log((1.0 - _AFFINITY_EPS) / _AFFINITY_EPS)


def affinity_to_cost(affinity: float) -> float:
    """Map an affinity in [0, 1] to a multicut edge cost via the clipped logit."""
    a = min(max(float(affinity), _AFFINITY_EPS), 1.0 - _AFFINITY_EPS)
    return math.log(a / (1.0 - a))


def gaec(graph: ContractionGraph, threshold: float = 0.5) -> ContractionGraph:
    """Contract max-affinity edges while the best one exceeds ``threshold``.

    Mutates and returns ``graph``. Deterministic: ties go to the smallest
    ordered vertex pair. The heavy lifting runs in the selected kernel
    backend; the graph is rebuilt from the kernel's merge result.
    """
    if not 0.0 <= threshold <= 1.0:
        raise InputError(f"threshold must lie in [0, 1], got {threshold}")
    if graph.n_vertices == 0:
        return graph
    ids = sorted(graph.segments)
    index = {sid: i for i, sid in enumerate(ids)}
    eu, ev, ea = [], [], []
    for u, v, a in graph.edges():
        iu, iv = index[u], index[v]
        if iu > iv:
            iu, iv = iv, iu
        eu.append(iu)
        ev.append(iv)
        ea.append(a)
    order = np.lexsort((ev, eu)) if eu else np.empty(0, dtype=np.int64)
    eu = np.asarray(eu, dtype=np.int64)[order]
    ev = np.asarray(ev, dtype=np.int64)[order]
    ea = np.asarray(ea, dtype=np.float64)[order]
    root, fin_u, fin_v, fin_a = kernels.gaec_core(len(ids), eu, ev, ea, threshold)
    graph.apply_roots(ids, root, fin_u, fin_v, fin_a)
    return graph


def multicut_cost(partition, edges) -> float:
    """Total cost of the edges cut by ``partition``.

    ``partition``: iterable of vertex collections (or a vertex -> block
    mapping); ``edges``: iterable of (u, v, cost) on the original vertices.
    An edge is cut iff its endpoints lie in different blocks.
    """
    if isinstance(partition, dict):
        block_of = dict(partition)
    else:
        block_of = {}
        for b, block in enumerate(partition):
            for vertex in block:
                if vertex in block_of:
                    raise InputError(f"vertex {vertex} appears in two blocks")
                block_of[vertex] = b
    total = 0.0
    for u, v, cost in edges:
        if u not in block_of or v not in block_of:
            raise InputError(f"edge ({u}, {v}) references a vertex outside the partition")
        if block_of[u] != block_of[v]:
            total += float(cost)
    return total
