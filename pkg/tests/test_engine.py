import math

import numpy as np
import pytest

from affcut import InputError, affinity_to_cost, gaec, multicut_cost
from affcut.graph import bare_graph

from conftest import random_graph


def naive_greedy_contraction(n, edges, threshold):
    """Independent max-scan contraction oracle (no queue, no cleverness)."""
    adj = {i: {} for i in range(n)}
    for u, v, a in edges:
        adj[u][v] = a
        adj[v][u] = a
    parent = list(range(n))
    while True:
        best = None
        for u in sorted(adj):
            for v in sorted(adj[u]):
                if u < v:
                    key = (adj[u][v], -u, -v)
                    if best is None or key > best[0]:
                        best = (key, u, v)
        if best is None or best[0][0] <= threshold:
            break
        _, u, v = best
        parent[v] = u
        moved = adj.pop(v)
        del adj[u][v]
        for t, a_vt in moved.items():
            if t == u:
                continue
            adj[u][t] = 0.5 * (adj[u][t] + a_vt) if t in adj[u] else a_vt
            del adj[t][v]
            adj[t][u] = adj[u][t]

    def root(i):
        while parent[i] != i:
            i = parent[i]
        return i

    groups = {}
    for i in range(n):
        groups.setdefault(root(i), set()).add(i)
    return sorted(frozenset(b) for b in groups.values())


def test_path_graph_merges_through():
    g = bare_graph(3, [(0, 1, 0.9), (1, 2, 0.8)])
    gaec(g, 0.5)
    assert g.partition() == [frozenset({0, 1, 2})]


def test_path_graph_stops_at_weak_tail():
    g = bare_graph(3, [(0, 1, 0.9), (1, 2, 0.1)])
    gaec(g, 0.5)
    assert sorted(g.partition(), key=min) == [frozenset({0, 1}), frozenset({2})]
    assert g.affinity(0, 2) == pytest.approx(0.1)


def test_all_below_threshold_is_untouched():
    edges = [(0, 1, 0.5), (1, 2, 0.3), (0, 2, 0.2)]
    g = bare_graph(3, edges)
    gaec(g, 0.5)  # strict: affinities equal to the threshold stay cut
    assert g.n_vertices == 3
    assert g.affinity(0, 1) == pytest.approx(0.5)


def test_threshold_validation():
    with pytest.raises(InputError):
        gaec(bare_graph(2, [(0, 1, 0.9)]), 1.5)


def test_termination_and_postcondition():
    rng = np.random.default_rng(11)
    for _ in range(30):
        n, edges, g = random_graph(rng, n_range=(2, 14), edge_prob=0.7)
        gaec(g, 0.5)
        assert n - g.n_vertices <= n - 1
        for _, _, a in g.edges():
            assert a <= 0.5


def test_matches_naive_greedy_on_random_graphs():
    rng = np.random.default_rng(23)
    for _ in range(60):
        n, edges, g = random_graph(rng, n_range=(2, 12), edge_prob=0.6)
        gaec(g, 0.5)
        got = sorted(g.partition(), key=min)
        want = naive_greedy_contraction(n, edges, 0.5)
        assert got == want


def test_affinity_to_cost_logit():
    assert affinity_to_cost(0.5) == pytest.approx(0.0, abs=1e-12)
    assert affinity_to_cost(0.9) == pytest.approx(math.log(9.0), rel=1e-12)
    cap = math.log((1 - 1e-6) / 1e-6)
    assert affinity_to_cost(1.0) == pytest.approx(cap)
    assert affinity_to_cost(0.0) == pytest.approx(-cap)
    assert abs(affinity_to_cost(1.0)) < 13.82


def test_multicut_cost_examples():
    # everything together: nothing is cut
    assert multicut_cost([{0, 1, 2}], [(0, 1, 1.0), (1, 2, -2.0)]) == 0.0
    # single edge cut
    assert multicut_cost([{0}, {1}], [(0, 1, -0.7)]) == pytest.approx(-0.7)

    # triangle (+1, +1, -1): check all five partitions against an
    # independent per-partition enumeration of cut edges
    edges = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, -1.0)]
    partitions = [
        [{0, 1, 2}],
        [{0}, {1, 2}],
        [{1}, {0, 2}],
        [{2}, {0, 1}],
        [{0}, {1}, {2}],
    ]

    def brute(partition):
        block_of = {v: i for i, b in enumerate(partition) for v in b}
        return sum(c for u, v, c in edges if block_of[u] != block_of[v])

    costs = [multicut_cost(p, edges) for p in partitions]
    assert costs == [brute(p) for p in partitions]
    # isolating the negative edge's endpoints from each other cuts both +1 edges
    assert multicut_cost([{1}, {0, 2}], edges) == pytest.approx(2.0)
    assert min(costs) == 0.0


def test_multicut_cost_unknown_vertex():
    with pytest.raises(InputError):
        multicut_cost([{0}, {1}], [(0, 2, 1.0)])
    with pytest.raises(InputError):
        multicut_cost([{0, 1}, {1}], [(0, 1, 1.0)])  # duplicated vertex


def test_cost_mapping_threshold_alignment():
    # contracting above-0.5 affinities is descent on the logit objective:
    # joining an attractive (a > 0.5) pair saves positive cost
    for a in (0.6, 0.8, 0.99):
        assert affinity_to_cost(a) > 0
    for a in (0.4, 0.2, 0.01):
        assert affinity_to_cost(a) < 0
