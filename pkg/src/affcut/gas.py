"""Greedy association: fast label propagation for the finest level.

Replaces the bottom-level contraction pass: instead of maintaining a
priority queue, unlabeled pixels repeatedly adopt the label of their
highest-affinity already-labeled 4-neighbor (when that affinity strictly
exceeds the threshold) until nothing changes. Whatever remains unlabeled
becomes background.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import InputError
from .types import BACKGROUND, UNLABELED, AffinityMap, LabelMap


def gas(labels: LabelMap, affinity: AffinityMap, threshold: float = 0.5,
        rng_seed: int = 0) -> LabelMap:
    """Propagate labels to UNLABELED pixels, then background the rest.

    Each sweep visits the remaining unlabeled pixels in a fresh seeded
    shuffle; assignments made early in a sweep are visible to later pixels
    in the same sweep. The seed only affects visit order, never whether a
    uniquely-connected pixel ends up labeled.
    """
    if labels.shape != affinity.shape:
        raise InputError("label map and affinity map shapes differ")
    if not 0.0 <= threshold <= 1.0:
        raise InputError(f"threshold must lie in [0, 1], got {threshold}")
    out = np.ascontiguousarray(labels.labels, dtype=np.int32).copy()
    aff = np.ascontiguousarray(affinity.values, dtype=np.float32)
    rng = np.random.default_rng(rng_seed)
    flat = out.reshape(-1)
    while True:
        unresolved = np.flatnonzero(flat == UNLABELED)
        if unresolved.size == 0:
            break
        order = rng.permutation(unresolved)
        assigned = kernels.gas_sweep(out, aff, order, threshold)
        if assigned == 0:
            break
    flat[flat == UNLABELED] = BACKGROUND
    return LabelMap(out)
