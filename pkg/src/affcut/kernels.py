"""Kernel backend selection.

Prefers the compiled extension when it imported cleanly, otherwise falls
back to the pure-Python implementations. ``AFFCUT_KERNEL=py`` or
``AFFCUT_KERNEL=cy`` forces a backend (the latter raises if the extension
is not built). Both backends are bit-identical by construction; the test
suite enforces it.
"""

import os

import numpy as np

from . import _kernels_py
from .errors import InputError

_cy = None
try:
    from . import _kernels_cy as _cy
except ImportError:
    _cy = None

_force = os.environ.get("AFFCUT_KERNEL", "auto").strip().lower()
if _force in ("", "auto"):
    _impl = _cy if _cy is not None else _kernels_py
elif _force in ("py", "python"):
    _impl = _kernels_py
elif _force in ("cy", "c", "compiled"):
    if _cy is None:
        raise ImportError("AFFCUT_KERNEL=cy but the compiled kernels are not built")
    _impl = _cy
else:
    raise ImportError(f"unknown AFFCUT_KERNEL value {_force!r}")

BACKEND = "compiled" if _impl is _cy else "python"


def backends() -> dict:
    """All importable backends, keyed by name (for parity tests/benchmarks)."""
    out = {"python": _kernels_py}
    if _cy is not None:
        out["compiled"] = _cy
    return out


def set_backend(name: str) -> str:
    """Retarget the active backend in-process; returns the previous name.

    Meant for benchmarks and tests; normal selection happens at import time
    (optionally via ``AFFCUT_KERNEL``).
    """
    global _impl, BACKEND
    if name not in backends():
        raise InputError(f"unknown or unavailable backend {name!r}")
    previous = BACKEND
    _impl = backends()[name]
    BACKEND = name
    return previous


def gaec_core(n, edges_u, edges_v, affinities, threshold, impl=None, validate=True):
    """Run greedy edge contraction on a flat edge list; see kernel docs.

    ``validate=False`` skips the input checks for callers that construct
    the arrays themselves.
    """
    eu = np.ascontiguousarray(edges_u, dtype=np.int64)
    ev = np.ascontiguousarray(edges_v, dtype=np.int64)
    ea = np.ascontiguousarray(affinities, dtype=np.float64)
    if validate:
        if not 0.0 <= threshold <= 1.0:
            raise InputError(f"threshold must lie in [0, 1], got {threshold}")
        if not (eu.shape == ev.shape == ea.shape):
            raise InputError("edge arrays must have matching lengths")
        if eu.size and (eu.min() < 0 or ev.max() >= n):
            raise InputError("edge endpoint out of range")
        if np.any(eu >= ev):
            raise InputError("edges must satisfy u < v")
    return (impl or _impl).gaec_core(int(n), eu, ev, ea, float(threshold))


def gas_sweep(labels, affinity, order, threshold, impl=None):
    """One in-place greedy-association sweep; see kernel docs."""
    if labels.dtype != np.int32 or not labels.flags.c_contiguous:
        raise InputError("labels must be a C-contiguous int32 array")
    if affinity.dtype != np.float32 or not affinity.flags.c_contiguous:
        raise InputError("affinity must be a C-contiguous float32 array")
    order = np.ascontiguousarray(order, dtype=np.int64)
    return (impl or _impl).gas_sweep(labels, affinity, order, float(threshold))


def id_stats(labels, semantic, embedding, n_ids, impl=None):
    """Per-id statistics of a final label map; see kernel docs."""
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    return (impl or _impl).id_stats(
        labels,
        np.ascontiguousarray(semantic, dtype=np.float32),
        np.ascontiguousarray(embedding, dtype=np.float32),
        int(n_ids),
    )


def label_components(seeds, impl=None):
    """Components of equal positive seed ids; see kernel docs."""
    seeds = np.ascontiguousarray(seeds, dtype=np.int32)
    if seeds.ndim != 2:
        raise InputError("seeds must be a 2-D map")
    return (impl or _impl).label_components(seeds)


def build_graph(seeds, affinity, semantic, embedding, impl=None):
    """Fused level-graph construction; see kernel docs."""
    seeds = np.ascontiguousarray(seeds, dtype=np.int32)
    return (impl or _impl).build_graph(
        seeds,
        np.ascontiguousarray(affinity, dtype=np.float32),
        np.ascontiguousarray(semantic, dtype=np.float32),
        np.ascontiguousarray(embedding, dtype=np.float32),
    )
