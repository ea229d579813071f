import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affcut import BACKGROUND, UNLABELED, LabelMap, LogicError, build_pixel_graph
from affcut.graph import Segment

from conftest import affinity_from_edges, grid_maps, random_graph, unit_segment


def test_build_all_unlabeled_2x2():
    aff, sem, emb = grid_maps(2, 2, affinity=0.9)
    seeds = LabelMap(np.full((2, 2), UNLABELED, np.int32))
    g = build_pixel_graph(aff, sem, emb, seeds, [True])
    assert g.n_vertices == 4
    assert g.n_edges == 4
    assert all(abs(a - np.float32(0.9)) < 1e-12 for _, _, a in g.edges())


def test_build_all_background_is_empty():
    aff, sem, emb = grid_maps(2, 2)
    seeds = LabelMap(np.full((2, 2), BACKGROUND, np.int32))
    g = build_pixel_graph(aff, sem, emb, seeds, [True])
    assert g.n_vertices == 0 and g.n_edges == 0


def test_build_half_seeded_4x4():
    # left 4x2 block carries seed id 7, right half is unlabeled
    seeds = np.full((4, 4), UNLABELED, np.int32)
    seeds[:, :2] = 7
    edge_affinity = {}
    crossing = {}
    for y in range(4):
        for x in range(4):
            if x < 3:
                a = 0.1 + 0.05 * (4 * y + x)
                edge_affinity[((y, x), (y, x + 1))] = a
                if x == 1:
                    crossing[y] = a
            if y < 3:
                edge_affinity[((y, x), (y + 1, x))] = 0.5
    aff = affinity_from_edges(4, 4, edge_affinity)
    _, sem, emb = grid_maps(4, 4)
    g = build_pixel_graph(aff, sem, emb, LabelMap(seeds), [True])
    assert g.n_vertices == 9  # one seeded component plus 8 free pixels

    seeded = [sid for sid, seg in g.segments.items() if seg.pixel_count == 8]
    assert len(seeded) == 1
    sid = seeded[0]
    seg = g.segments[sid]
    assert seg.bbox == (0, 0, 3, 1)
    # the seeded vertex meets exactly the four column-2 pixels, each across
    # a single grid edge whose affinity passes through untouched
    nbrs = sorted(g.neighbors(sid))
    assert len(nbrs) == 4
    got = sorted(g.affinity(sid, t) for t in nbrs)
    want = sorted(np.float32(crossing[y]) for y in range(4))
    assert np.allclose(got, want, atol=1e-7)


def test_seed_split_into_connected_components():
    # one id on two disconnected regions becomes two vertices
    seeds = np.full((3, 3), BACKGROUND, np.int32)
    seeds[0, 0] = 5
    seeds[2, 2] = 5
    aff, sem, emb = grid_maps(3, 3)
    g = build_pixel_graph(aff, sem, emb, LabelMap(seeds), [True])
    assert g.n_vertices == 2


def test_participation_excludes_background_class():
    aff, _, emb = grid_maps(2, 2)
    sem = np.zeros((2, 2, 2), np.float32)
    sem[0, :, :1] = 1.0  # left column is background class
    sem[1, :, 1:] = 1.0
    from affcut import SemanticMap
    seeds = LabelMap(np.full((2, 2), UNLABELED, np.int32))
    g = build_pixel_graph(aff, SemanticMap(sem), emb, seeds, [False, True])
    assert g.n_vertices == 2


def test_contract_statistics_and_affinities():
    u = unit_segment(0, 0, 0, 1, 3, count=5, sem=[2.5, 2.5], emb=[1.0])
    v = unit_segment(1, 2, 1, 4, 2, count=3, sem=[1.5, 1.5], emb=[2.0])
    t = unit_segment(2, 5, 5, 5, 5, count=1, sem=[0.5, 0.5], emb=[0.0])
    w = unit_segment(3, 6, 6, 6, 6, count=1, sem=[0.5, 0.5], emb=[0.0])
    from affcut import ContractionGraph
    g = ContractionGraph()
    for s in (u, v, t, w):
        g.add_segment(s)
    g.add_edge(0, 1, 0.9)
    g.add_edge(0, 2, 0.8)   # common neighbor
    g.add_edge(1, 2, 0.2)
    g.add_edge(1, 3, 0.3)   # v-only neighbor
    merged = g.contract(0, 1)
    assert merged == 0
    seg = g.segments[0]
    assert seg.pixel_count == 8
    assert seg.bbox == (0, 0, 4, 3)
    assert np.allclose(seg.semantic_sum, [4.0, 4.0])
    assert np.allclose(seg.embedding_sum, [3.0])
    assert g.affinity(0, 2) == pytest.approx(0.5)   # avg(0.8, 0.2)
    assert g.affinity(0, 3) == pytest.approx(0.3)   # untouched
    assert 1 not in g.segments


def test_segment_validation():
    good = Segment(0, 4, (0, 0, 1, 1), np.array([2.0, 2.0]), np.zeros(1))
    good.validate()
    assert good.center == (0.5, 0.5)
    assert good.height == 2 and good.width == 2
    bad_mean = Segment(1, 4, (0, 0, 1, 1), np.array([2.0, 2.5]), np.zeros(1))
    with pytest.raises(Exception):
        bad_mean.validate()
    with pytest.raises(Exception):
        Segment(2, 0, (0, 0, 0, 0), np.zeros(1), np.zeros(1))


def test_contract_missing_edge_is_logic_error():
    from affcut import ContractionGraph
    g = ContractionGraph()
    g.add_segment(unit_segment(0, 0, 0, 0, 0))
    g.add_segment(unit_segment(1, 1, 1, 1, 1))
    with pytest.raises(LogicError):
        g.contract(0, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_random_contractions_conserve_pixels_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    n, edges, g = random_graph(rng, n_range=(2, 10), edge_prob=0.6)
    total = sum(s.pixel_count for s in g.segments.values())
    for _ in range(int(rng.integers(0, n))):
        live_edges = list(g.edges())
        if not live_edges:
            break
        u, v, _ = live_edges[int(rng.integers(0, len(live_edges)))]
        g.contract(u, v)
        # conservation
        assert sum(s.pixel_count for s in g.segments.values()) == total
        # adjacency symmetry with identical affinities, no self loops
        for a in g.segments:
            for b in g.neighbors(a):
                assert a != b
                assert g.affinity(b, a) == g.affinity(a, b)


def test_queue_top_matches_exhaustive_scan():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n, edges, g = random_graph(rng, n_range=(4, 14), edge_prob=0.75)
        if not edges:
            continue
        for _ in range(n):
            best = g.best_edge()
            live = list(g.edges())
            if not live:
                assert best is None
                break
            scan = max(a for _, _, a in live)
            assert best is not None and best[0] == pytest.approx(scan, abs=0)
            u, v, _ = live[int(rng.integers(0, len(live)))]
            g.contract(u, v)


def test_partition_tracks_original_members():
    rng = np.random.default_rng(3)
    n, edges, g = random_graph(rng, n_range=(5, 9), edge_prob=0.9)
    merged_any = False
    for _ in range(3):
        live = list(g.edges())
        if not live:
            break
        u, v, _ = live[0]
        g.contract(u, v)
        merged_any = True
    blocks = g.partition()
    assert sorted(x for b in blocks for x in b) == list(range(n))
    if merged_any:
        assert any(len(b) > 1 for b in blocks)
