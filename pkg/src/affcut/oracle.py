"""Exact minimum-cost multicut on small graphs by exhaustive enumeration.

Every set partition of the vertices induces a cut vector that satisfies the
multicut cycle constraints, so enumerating restricted-growth strings (the
canonical partition encoding) visits each feasible solution exactly once.
Serves as the ground truth the greedy contraction results are scored
against.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .engine import affinity_to_cost, gaec, multicut_cost
from .errors import InputError
from .graph import bare_graph

MAX_VERTICES = 12

BELL_NUMBERS = (1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975, 678570, 4213597)


@lru_cache(maxsize=4)
def _rgs_matrix(n: int) -> np.ndarray:
    """All restricted-growth strings of length n, lexicographically ordered.

    Row r of the result is the r-th set partition of {0..n-1} encoded as
    block indices; shape (Bell(n), n), dtype int8.
    """
    rows = np.zeros((1, 1), dtype=np.int8)
    maxes = np.zeros(1, dtype=np.int8)
    for _ in range(n - 1):
        counts = maxes.astype(np.int64) + 2
        total = int(counts.sum())
        rep = np.repeat(np.arange(rows.shape[0]), counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        new_col = (np.arange(total) - starts).astype(np.int8)
        rows = np.concatenate([rows[rep], new_col[:, None]], axis=1)
        maxes = np.maximum(maxes[rep], new_col)
    return rows


def set_partitions(n: int):
    """Yield every set partition of {0..n-1} as a tuple of sorted tuples."""
    if n < 1 or n > MAX_VERTICES:
        raise InputError(f"partition enumeration supports 1..{MAX_VERTICES} elements, got {n}")
    for row in _rgs_matrix(n):
        n_blocks = int(row.max()) + 1
        blocks = [[] for _ in range(n_blocks)]
        for v, b in enumerate(row):
            blocks[b].append(v)
        yield tuple(tuple(b) for b in blocks)


@dataclass(frozen=True)
class MulticutSolution:
    cost: float
    labels: tuple          # restricted-growth string, vertex -> block index
    blocks: tuple          # tuple of tuples of vertex ids


def exact_multicut(n_vertices: int, edges, cap: int = MAX_VERTICES) -> MulticutSolution:
    """Optimal multicut by brute force over all set partitions.

    ``edges``: iterable of (u, v, cost). On cost ties the lexicographically
    smallest restricted-growth string wins, which makes results canonical.
    """
    if cap > MAX_VERTICES:
        raise InputError(f"cap cannot exceed {MAX_VERTICES}")
    if n_vertices < 1:
        raise InputError("need at least one vertex")
    if n_vertices > cap:
        raise InputError(f"{n_vertices} vertices exceeds the cap of {cap} "
                         f"(Bell numbers explode beyond it)")
    edge_list = [(int(u), int(v), float(c)) for u, v, c in edges]
    for u, v, _ in edge_list:
        if not (0 <= u < n_vertices and 0 <= v < n_vertices):
            raise InputError(f"edge ({u}, {v}) references an unknown vertex")
        if u == v:
            raise InputError("self-loops are not allowed")

    rows = _rgs_matrix(n_vertices)
    total = np.zeros(rows.shape[0], dtype=np.float64)
    for u, v, c in edge_list:
        total += (rows[:, u] != rows[:, v]) * c
    best = int(np.argmin(total))  # first minimum = lexicographically smallest

    labels = tuple(int(b) for b in rows[best])
    n_blocks = max(labels) + 1
    blocks = [[] for _ in range(n_blocks)]
    for v, b in enumerate(labels):
        blocks[b].append(v)
    return MulticutSolution(cost=float(total[best]), labels=labels,
                            blocks=tuple(tuple(b) for b in blocks))


# -- randomized instances and the greedy-vs-exact harness -------------------

def planted_instance(rng: np.random.Generator, n_range=(2, 9), margin: float = 0.2,
                     threshold: float = 0.5):
    """Complete graph with a planted grouping and a clear affinity margin.

    Within-group affinities are >= threshold + margin, across-group ones are
    <= threshold - margin. Returns (n, [(u, v, affinity)], group labels).
    """
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    groups = rng.integers(0, int(rng.integers(1, n + 1)), size=n)
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if groups[u] == groups[v]:
                a = rng.uniform(threshold + margin, 1.0)
            else:
                a = rng.uniform(0.0, threshold - margin)
            edges.append((u, v, float(a)))
    return n, edges, groups


def random_instance(rng: np.random.Generator, n_range=(2, 9), edge_prob: float = 0.7):
    """Random graph with uniform affinities in [0, 1]."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < edge_prob:
                edges.append((u, v, float(rng.random())))
    return n, edges


@dataclass
class GapCase:
    n_vertices: int
    greedy_cost: float
    optimal_cost: float

    @property
    def gap(self) -> float:
        return self.greedy_cost - self.optimal_cost


@dataclass
class GapReport:
    cases: list

    @property
    def n_cases(self) -> int:
        return len(self.cases)

    @property
    def n_optimal(self) -> int:
        return sum(1 for c in self.cases if c.gap <= 1e-9)

    @property
    def max_gap(self) -> float:
        return max((c.gap for c in self.cases), default=0.0)

    @property
    def mean_gap(self) -> float:
        if not self.cases:
            return 0.0
        return sum(c.gap for c in self.cases) / len(self.cases)


def greedy_gap_report(instances, threshold: float = 0.5) -> GapReport:
    """Score greedy contraction against the exact optimum per instance.

    ``instances``: iterable of (n, [(u, v, affinity)]). Affinities map to
    costs through the clipped logit, so greedy merging above the threshold
    is greedy descent on the same objective the oracle minimizes.
    """
    cases = []
    for n, affinity_edges in instances:
        cost_edges = [(u, v, affinity_to_cost(a)) for u, v, a in affinity_edges]
        g = bare_graph(n, affinity_edges)
        gaec(g, threshold)
        greedy_cost = multicut_cost(g.partition(), cost_edges)
        opt = exact_multicut(n, cost_edges)
        cases.append(GapCase(n, greedy_cost, opt.cost))
    return GapReport(cases)
