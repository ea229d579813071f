import math

import numpy as np
import pytest

from affcut import (AffinityMap, EmbeddingMap, GroundTruthScene, InputError,
                    LossWeights, SemanticMap, default_loss_weights, grouping_losses,
                    grouping_losses_grad, phi, phi_grad, semantic_affinity_losses,
                    total_loss)

LN2 = math.log(2.0)
EPS = 1e-7


# -- independent plain-loop reference implementations ------------------------

def ref_bce(t, p):
    p = min(max(p, EPS), 1.0 - EPS)
    return -t * math.log(p) - (1.0 - t) * math.log(1.0 - p)


def ref_phi(a, b, alpha=LN2):
    return math.exp(-alpha * sum((x - y) ** 2 for x, y in zip(a, b)))


def ref_grouping(emb, labels, alpha=LN2):
    ids = sorted(int(i) for i in np.unique(labels) if i >= 1)
    means = {}
    for sid in ids:
        ys, xs = np.nonzero(labels == sid)
        means[sid] = [float(emb[c, ys, xs].mean()) for c in range(emb.shape[0])]
    pull = 0.0
    for sid in ids:
        ys, xs = np.nonzero(labels == sid)
        inner = 0.0
        for y, x in zip(ys, xs):
            inner += ref_bce(1.0, ref_phi(means[sid], emb[:, y, x], alpha))
        pull += inner / len(ys)
    pull = pull / len(ids) if ids else 0.0
    push = 0.0
    if len(ids) >= 2:
        for a in ids:
            for b in ids:
                if a != b:
                    push += ref_bce(0.0, ref_phi(means[a], means[b], alpha))
        push /= len(ids) ** 2 - len(ids)
    return push, pull


def ref_semantic_affinity(sem, aff, gt, weights):
    h, w = gt.labels.shape
    sem_total = 0.0
    for y in range(h):
        for x in range(w):
            for c in range(sem.shape[0]):
                p = min(max(float(sem[c, y, x]), EPS), 1.0 - EPS)
                sem_total -= gt.semantic_onehot[c, y, x] * math.log(p)
    sem_total /= h * w
    boundary_sum = solid_sum = 0.0
    n_b = 0
    for y in range(h):
        for x in range(w):
            pix = weights[y, x] * sum(
                ref_bce(gt.affinity_gt[d, y, x], float(aff[d, y, x])) for d in range(4))
            if gt.boundary_mask[y, x]:
                boundary_sum += pix
                n_b += 1
            else:
                solid_sum += pix
    n_s = h * w - n_b
    return (sem_total,
            boundary_sum / n_b if n_b else 0.0,
            solid_sum / n_s if n_s else 0.0)


def tiny_scene():
    labels = np.array([
        [1, 1, 0, 2],
        [1, 1, 0, 2],
        [0, 0, 0, 2],
    ], dtype=np.int32)
    return GroundTruthScene.from_labels(labels, [0, 1, 2], 3)


# -- phi ----------------------------------------------------------------------

def test_phi_identity_and_reference_points():
    x = np.array([0.3, -1.2, 4.0])
    assert phi(x, x) == 1.0
    a = np.zeros(2)
    b = np.array([1.0, 0.0])
    assert phi(a, b) == pytest.approx(0.5, abs=1e-12)      # unit squared distance
    c = np.array([1.0, 1.0])
    assert phi(a, c) == pytest.approx(math.exp(-2 * LN2), abs=1e-12)  # 0.25
    assert phi(a, c) == pytest.approx(0.25, abs=1e-12)


def test_phi_validation_and_shape():
    with pytest.raises(InputError):
        phi([1.0], [1.0, 2.0])
    with pytest.raises(InputError):
        phi([np.nan], [0.0])


def test_phi_symmetric_strictly_decreasing():
    a = np.zeros(3)
    prev = 1.0
    for r in (0.5, 1.0, 2.0, 3.0):
        b = np.array([r, 0.0, 0.0])
        val = phi(a, b)
        assert val == phi(b, a)
        assert val < prev
        prev = val


def test_phi_gradient_finite_difference():
    rng = np.random.default_rng(0)
    a = rng.normal(size=4)
    b = rng.normal(size=4)
    grad = phi_grad(a, b)
    h = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        fd = (phi(a + e, b) - phi(a - e, b)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-9)


# -- ground-truth scene --------------------------------------------------------

def test_ground_truth_scene_derivations():
    gt = tiny_scene()
    assert list(gt.instance_ids) == [1, 2]
    assert gt.semantic_onehot.shape == (3, 3, 4)
    assert gt.semantic_onehot[1, 0, 0] == 1.0
    assert gt.semantic_onehot[0, 2, 0] == 1.0
    # affinity gt: 1 only between same-instance neighbors
    assert gt.affinity_gt[1, 0, 0] == 1.0    # (0,0)-(1,0), both id 1
    assert gt.affinity_gt[3, 0, 1] == 0.0    # (0,1)-(0,2), instance vs background
    # boundary: independent recomputation with explicit loops
    h, w = gt.labels.shape
    want = np.zeros((h, w), bool)
    for y in range(h):
        for x in range(w):
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and gt.labels[yy, xx] != gt.labels[y, x]:
                    want[y, x] = True
    assert np.array_equal(gt.boundary_mask, want)


# -- grouping losses -----------------------------------------------------------

def test_pull_zero_when_pixels_equal_mean():
    gt = tiny_scene()
    emb = np.zeros((2, 3, 4), np.float32)
    emb[:, gt.labels == 1] = 0.5
    emb[:, gt.labels == 2] = 5.0
    result = grouping_losses(EmbeddingMap(emb), gt)
    assert result.pull == pytest.approx(0.0, abs=1e-6)
    assert result.n_instances == 2 and result.push_defined


def test_push_at_half_similarity():
    gt = tiny_scene()
    emb = np.zeros((1, 3, 4), np.float32)
    emb[0, gt.labels == 2] = 1.0   # unit squared distance between means
    result = grouping_losses(EmbeddingMap(emb), gt)
    assert result.push == pytest.approx(-math.log(0.5), abs=1e-9)  # 0.6931


def test_single_and_zero_instance_flags():
    labels = np.zeros((2, 2), np.int32)
    labels[0, 0] = 1
    gt = GroundTruthScene.from_labels(labels, [0, 1], 2)
    result = grouping_losses(EmbeddingMap(np.zeros((1, 2, 2), np.float32)), gt)
    assert result.push == 0.0 and not result.push_defined and result.pull_defined

    gt_empty = GroundTruthScene.from_labels(np.zeros((2, 2), np.int32), [0], 1)
    result = grouping_losses(EmbeddingMap(np.zeros((1, 2, 2), np.float32)), gt_empty)
    assert result.push == 0.0 and result.pull == 0.0
    assert not result.push_defined and not result.pull_defined


def test_grouping_matches_reference_and_relabeling_invariance():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 4, size=(5, 6)).astype(np.int32)
    emb = rng.normal(size=(3, 5, 6)).astype(np.float32)
    gt = GroundTruthScene.from_labels(labels, [0, 1, 2, 3], 4)
    result = grouping_losses(EmbeddingMap(emb), gt)
    push, pull = ref_grouping(emb.astype(np.float64), labels)
    assert result.push == pytest.approx(push, rel=1e-9)
    assert result.pull == pytest.approx(pull, rel=1e-9)
    assert result.push >= 0 and result.pull >= 0

    permuted = labels.copy()
    permuted[labels == 1] = 3
    permuted[labels == 3] = 1
    gt_p = GroundTruthScene.from_labels(permuted, [0, 1, 2, 3], 4)
    result_p = grouping_losses(EmbeddingMap(emb), gt_p)
    assert result_p.push == pytest.approx(result.push, rel=1e-9)
    assert result_p.pull == pytest.approx(result.pull, rel=1e-9)


def test_grouping_gradient_finite_difference():
    rng = np.random.default_rng(5)
    labels = np.array([[1, 1, 2], [1, 2, 2]], dtype=np.int32)
    emb = rng.normal(scale=0.4, size=(2, 2, 3)).astype(np.float64)
    gt = GroundTruthScene.from_labels(labels, [0, 1, 2], 3)
    grad_push, grad_pull = grouping_losses_grad(EmbeddingMap(emb.astype(np.float32)), gt)
    h = 1e-6
    for c in range(2):
        for y in range(2):
            for x in range(3):
                plus = emb.copy()
                plus[c, y, x] += h
                minus = emb.copy()
                minus[c, y, x] -= h
                rp = grouping_losses(EmbeddingMap(plus.astype(np.float32)), gt)
                rm = grouping_losses(EmbeddingMap(minus.astype(np.float32)), gt)
                fd_push = (rp.push - rm.push) / (2 * h)
                fd_pull = (rp.pull - rm.pull) / (2 * h)
                # float32 storage limits finite differences to ~1e-2 accuracy,
                # so compare against a float64 forward pass instead
                rp64 = ref_grouping(plus, labels)
                rm64 = ref_grouping(minus, labels)
                fd_push = (rp64[0] - rm64[0]) / (2 * h)
                fd_pull = (rp64[1] - rm64[1]) / (2 * h)
                assert grad_push[c, y, x] == pytest.approx(fd_push, rel=1e-4, abs=1e-7)
                assert grad_pull[c, y, x] == pytest.approx(fd_pull, rel=1e-4, abs=1e-7)


# -- semantic and affinity losses ----------------------------------------------

def test_perfect_predictions_vanish():
    gt = tiny_scene()
    sem = SemanticMap(gt.semantic_onehot.astype(np.float32))
    aff = AffinityMap(gt.affinity_gt.astype(np.float32))
    result = semantic_affinity_losses(sem, aff, gt)
    assert result.semantic == pytest.approx(0.0, abs=1e-6)
    assert result.boundary == pytest.approx(0.0, abs=1e-5)
    assert result.solid == pytest.approx(0.0, abs=1e-5)


def test_uniform_semantic_prediction_is_log_c():
    gt = tiny_scene()
    c = 3
    sem = SemanticMap(np.full((c, 3, 4), 1.0 / c, np.float32))
    aff = AffinityMap(gt.affinity_gt.astype(np.float32))
    result = semantic_affinity_losses(sem, aff, gt)
    # float32 stores 1/3 inexactly; compare against log of the stored value
    stored = float(np.float32(1.0 / c))
    assert result.semantic == pytest.approx(-math.log(stored), abs=1e-9)
    assert abs(result.semantic - math.log(c)) < 1e-7


def test_uniform_semantic_exact_log_c_with_exact_third():
    # c = 4 stores exactly, making the ln c identity exact
    labels = np.array([[1, 0], [0, 2]], dtype=np.int32)
    gt = GroundTruthScene.from_labels(labels, [0, 1, 2, 3], 4)
    sem = SemanticMap(np.full((4, 2, 2), 0.25, np.float32))
    aff = AffinityMap(gt.affinity_gt.astype(np.float32))
    result = semantic_affinity_losses(sem, aff, gt)
    assert result.semantic == pytest.approx(math.log(4.0), abs=1e-9)


def test_interior_pixel_bce_contribution():
    # one instance everywhere: no boundary pixels; perturbing one interior
    # pixel's four affinities to 0.5 adds 4 ln 2 times its weight to the
    # solid sum
    labels = np.ones((3, 3), np.int32)
    gt = GroundTruthScene.from_labels(labels, [0, 1], 2)
    assert gt.n_boundary == 0
    sem = SemanticMap(gt.semantic_onehot.astype(np.float32))
    aff_perfect = gt.affinity_gt.astype(np.float32)
    base = semantic_affinity_losses(sem, AffinityMap(aff_perfect), gt)

    perturbed = aff_perfect.copy()
    perturbed[:, 1, 1] = 0.5                 # center pixel, all four directions
    perturbed[1, 0, 1] = 0.5                 # mirrored counterparts
    perturbed[0, 2, 1] = 0.5
    perturbed[3, 1, 0] = 0.5
    perturbed[2, 1, 2] = 0.5
    weights = np.ones((3, 3))
    result = semantic_affinity_losses(sem, AffinityMap(perturbed), gt, weights)
    want = ref_semantic_affinity(sem.values, perturbed, gt, weights)
    assert result.solid == pytest.approx(want[2], rel=1e-9)
    # the center pixel alone contributes 4 * ln 2 * w to the solid sum
    n = 9
    center_contrib = 4 * math.log(2.0)
    mirrored = 4 * (ref_bce(1.0, 0.5) - ref_bce(1.0, 1.0))
    assert (result.solid - base.solid) * n == pytest.approx(center_contrib + mirrored,
                                                            rel=1e-6)
    assert result.n_boundary == 0 and not result.boundary_defined


def test_losses_match_reference_on_random_scene():
    rng = np.random.default_rng(8)
    labels = rng.integers(0, 3, size=(4, 5)).astype(np.int32)
    gt = GroundTruthScene.from_labels(labels, [0, 1, 2], 3)
    sem_raw = rng.random((3, 4, 5)).astype(np.float32)
    sem = SemanticMap(sem_raw / sem_raw.sum(axis=0))
    aff = AffinityMap.symmetrize(rng.random((4, 4, 5)).astype(np.float32))
    weights = rng.uniform(0.5, 2.0, size=(4, 5))
    result = semantic_affinity_losses(sem, aff, gt, weights)
    want = ref_semantic_affinity(sem.values, aff.values, gt, weights)
    assert result.semantic == pytest.approx(want[0], rel=1e-9)
    assert result.boundary == pytest.approx(want[1], rel=1e-9)
    assert result.solid == pytest.approx(want[2], rel=1e-9)


def test_class_permutation_invariance_of_semantic_loss():
    rng = np.random.default_rng(13)
    labels = rng.integers(0, 3, size=(4, 4)).astype(np.int32)
    sem_raw = rng.random((3, 4, 4)).astype(np.float32)
    sem = sem_raw / sem_raw.sum(axis=0)
    gt = GroundTruthScene.from_labels(labels, [0, 1, 2], 3)
    aff = AffinityMap(gt.affinity_gt.astype(np.float32))
    base = semantic_affinity_losses(SemanticMap(sem), aff, gt)
    perm = [2, 0, 1]
    gt_p = GroundTruthScene.from_labels(labels, [perm[0], perm[1], perm[2]], 3)
    sem_p = np.empty_like(sem)
    for old, new in enumerate(perm):
        sem_p[new] = sem[old]
    result = semantic_affinity_losses(SemanticMap(sem_p), aff, gt_p)
    assert result.semantic == pytest.approx(base.semantic, rel=1e-12)


def test_weight_validation():
    gt = tiny_scene()
    sem = SemanticMap(gt.semantic_onehot.astype(np.float32))
    aff = AffinityMap(gt.affinity_gt.astype(np.float32))
    with pytest.raises(InputError):
        semantic_affinity_losses(sem, aff, gt, np.zeros((3, 4)))
    with pytest.raises(InputError):
        semantic_affinity_losses(sem, aff, gt, np.ones((2, 2)))


# -- total loss -----------------------------------------------------------------

def test_total_loss_examples():
    gt = tiny_scene()
    sem = SemanticMap(np.full((3, 3, 4), np.float32(1 / 3)))
    aff = AffinityMap(gt.affinity_gt.astype(np.float32))
    emb = EmbeddingMap(np.zeros((1, 3, 4), np.float32))
    sem_aff = semantic_affinity_losses(sem, aff, gt)
    grouping = grouping_losses(emb, gt)

    zero = LossWeights(semantic=0, push=0, pull=0, boundary=0, solid=0)
    assert total_loss([(sem_aff, grouping)], [zero]) == 0.0

    unit = LossWeights(semantic=1, push=1, pull=1, boundary=1, solid=1)
    want = sem_aff.semantic + sem_aff.boundary + sem_aff.solid \
        + grouping.push + grouping.pull
    assert total_loss([(sem_aff, grouping)], [unit]) == pytest.approx(want, rel=1e-12)

    with pytest.raises(InputError):
        LossWeights(semantic=-1)


def test_default_schedule_matches_independent_recompute():
    weights = default_loss_weights(4)
    assert [w.boundary for w in weights] == [0.25, 0.5, 1.0, 1.0]
    assert [w.solid for w in weights] == [0.25, 0.5, 1.0, 1.0]
    assert all(w.semantic == 2.0 and w.push == 0.5 and w.pull == 0.5 for w in weights)

    rng = np.random.default_rng(2)
    per_level = []
    for _ in range(4):
        labels = rng.integers(0, 3, size=(4, 4)).astype(np.int32)
        gt = GroundTruthScene.from_labels(labels, [0, 1, 2], 3)
        sem_raw = rng.random((3, 4, 4)).astype(np.float32)
        sem = SemanticMap(sem_raw / sem_raw.sum(axis=0))
        aff = AffinityMap.symmetrize(rng.random((4, 4, 4)).astype(np.float32))
        emb = EmbeddingMap(rng.normal(size=(2, 4, 4)).astype(np.float32))
        per_level.append((semantic_affinity_losses(sem, aff, gt),
                          grouping_losses(emb, gt)))
    got = total_loss(per_level, weights)
    want = 0.0
    for (sa, gr), w in zip(per_level, weights):
        want += 2.0 * sa.semantic + w.boundary * sa.boundary + w.solid * sa.solid \
            + 0.5 * gr.push + 0.5 * gr.pull
    assert got == pytest.approx(want, rel=1e-12)
