"""Dense tensor containers for affinity pyramids and label maps.

Conventions used throughout the package:

* tensors are channel-major ``float32`` arrays (``channels x h x w``),
* the affinity channel order is fixed as ``(up, down, left, right)``,
* label maps are ``int32`` with ``UNLABELED == -1``, ``BACKGROUND == 0``
  and instance ids ``>= 1``,
* pyramid levels are ordered finest first; each coarser level halves both
  dimensions (rounding up).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

UNLABELED = -1
BACKGROUND = 0

AFFINITY_CHANNELS = ("up", "down", "left", "right")
CH_UP, CH_DOWN, CH_LEFT, CH_RIGHT = range(4)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise InputError(message)


@dataclass(frozen=True)
class GridShape:
    height: int
    width: int

    def __post_init__(self):
        _require(self.height >= 1 and self.width >= 1, f"grid shape must be positive, got {self}")

    def half(self) -> "GridShape":
        return GridShape((self.height + 1) // 2, (self.width + 1) // 2)

    @property
    def pixels(self) -> int:
        return self.height * self.width

    def __iter__(self):
        return iter((self.height, self.width))


def _as_f32(values, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    _require(arr.ndim == ndim, f"{name} must have {ndim} dims, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


@dataclass
class AffinityMap:
    """4-neighbor affinities, one channel per direction, values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = _as_f32(self.values, "affinity values", 3)
        _require(self.values.shape[0] == 4, f"affinity map needs 4 channels, got {self.values.shape[0]}")

    @property
    def shape(self) -> GridShape:
        return GridShape(self.values.shape[1], self.values.shape[2])

    @staticmethod
    def symmetrize(raw) -> "AffinityMap":
        """Average the two directions of every grid edge and zero the borders.

        Idempotent: symmetrizing an already symmetric map reproduces it
        exactly (``(a + a) / 2 == a`` in IEEE arithmetic).
        """
        arr = _as_f32(raw, "affinity values", 3)
        _require(arr.shape[0] == 4, "affinity map needs 4 channels")
        out = np.zeros_like(arr)
        down = 0.5 * (arr[CH_DOWN, :-1, :] + arr[CH_UP, 1:, :])
        right = 0.5 * (arr[CH_RIGHT, :, :-1] + arr[CH_LEFT, :, 1:])
        out[CH_DOWN, :-1, :] = down
        out[CH_UP, 1:, :] = down
        out[CH_RIGHT, :, :-1] = right
        out[CH_LEFT, :, 1:] = right
        return AffinityMap(out)

    def validate(self) -> None:
        v = self.values
        _require(np.isfinite(v).all(), "affinity values must be finite")
        _require(float(v.min(initial=0.0)) >= 0.0 and float(v.max(initial=0.0)) <= 1.0,
                 "affinity values must lie in [0, 1]")
        _require(not v[CH_UP, 0, :].any() and not v[CH_DOWN, -1, :].any()
                 and not v[CH_LEFT, :, 0].any() and not v[CH_RIGHT, :, -1].any(),
                 "image-border affinity channels must be zero")
        _require(np.array_equal(v[CH_DOWN, :-1, :], v[CH_UP, 1:, :]),
                 "affinity map is not symmetric along the vertical axis")
        _require(np.array_equal(v[CH_RIGHT, :, :-1], v[CH_LEFT, :, 1:]),
                 "affinity map is not symmetric along the horizontal axis")


@dataclass
class SemanticMap:
    """Per-pixel class probability distributions, channel-major."""

    values: np.ndarray

    def __post_init__(self):
        self.values = _as_f32(self.values, "semantic values", 3)

    @property
    def classes(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> GridShape:
        return GridShape(self.values.shape[1], self.values.shape[2])

    def validate(self) -> None:
        v = self.values
        _require(np.isfinite(v).all(), "semantic values must be finite")
        _require(float(v.min(initial=0.0)) >= -1e-6, "semantic values must be non-negative")
        sums = v.sum(axis=0, dtype=np.float64)
        _require(bool(np.all(np.abs(sums - 1.0) <= 1e-5)),
                 "per-pixel semantic distributions must sum to 1 within 1e-5")


@dataclass
class EmbeddingMap:
    """Per-pixel grouping embeddings, channel-major."""

    values: np.ndarray

    def __post_init__(self):
        self.values = _as_f32(self.values, "embedding values", 3)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> GridShape:
        return GridShape(self.values.shape[1], self.values.shape[2])

    def validate(self) -> None:
        _require(np.isfinite(self.values).all(), "embedding values must be finite")


@dataclass
class PyramidLevel:
    affinity: AffinityMap
    semantic: SemanticMap
    embedding: EmbeddingMap

    def __post_init__(self):
        shp = self.affinity.shape
        _require(self.semantic.shape == shp and self.embedding.shape == shp,
                 "level tensors must share one grid shape")

    @property
    def shape(self) -> GridShape:
        return self.affinity.shape


@dataclass
class AffinityPyramid:
    """Multi-resolution stack of (affinity, semantic, embedding) tensors.

    ``levels[0]`` is the finest level. ``class_kinds[c]`` is True when class
    ``c`` is an instance class (False for background-like classes).
    """

    levels: list[PyramidLevel]
    class_kinds: np.ndarray

    def __post_init__(self):
        _require(len(self.levels) >= 1, "pyramid must contain at least one level")
        self.class_kinds = np.asarray(self.class_kinds, dtype=bool)
        _require(self.class_kinds.ndim == 1, "class_kinds must be a flat boolean vector")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def classes(self) -> int:
        return self.levels[0].semantic.classes

    @property
    def embedding_dim(self) -> int:
        return self.levels[0].embedding.dim

    def validate(self) -> None:
        c = self.classes
        k = self.embedding_dim
        _require(self.class_kinds.shape[0] == c, "class_kinds length must equal the class count")
        for i, lvl in enumerate(self.levels):
            _require(lvl.semantic.classes == c, f"level {i + 1} has a different class count")
            _require(lvl.embedding.dim == k, f"level {i + 1} has a different embedding dim")
            if i > 0:
                want = self.levels[i - 1].shape.half()
                _require(lvl.shape == want,
                         f"level {i + 1} shape {tuple(lvl.shape)} must halve level {i} "
                         f"(expected {tuple(want)})")
            lvl.affinity.validate()
            lvl.semantic.validate()
            lvl.embedding.validate()


@dataclass
class LabelMap:
    """Per-pixel labels: UNLABELED (-1), BACKGROUND (0) or instance id >= 1."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        _require(arr.ndim == 2, f"label map must be 2-D, got shape {arr.shape}")
        _require(np.issubdtype(arr.dtype, np.integer), "label map must be integer valued")
        self.labels = np.ascontiguousarray(arr, dtype=np.int32)
        _require(int(self.labels.min(initial=0)) >= UNLABELED, "labels below UNLABELED are invalid")

    @property
    def shape(self) -> GridShape:
        return GridShape(self.labels.shape[0], self.labels.shape[1])

    def instance_ids(self) -> np.ndarray:
        ids = np.unique(self.labels)
        return ids[ids >= 1]

    @property
    def n_unlabeled(self) -> int:
        return int(np.count_nonzero(self.labels == UNLABELED))
