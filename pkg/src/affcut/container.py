"""On-disk pyramid containers, label images and segment tables.

A container directory holds ``manifest.json`` plus one raw blob per tensor
per level: row-major, channel-major, 32-bit little-endian IEEE floats.
Every read validates the manifest against blob byte lengths, screens for
NaNs and re-checks all tensor invariants before any algorithm touches the
data. Label images are 16-bit binary PGM (big-endian sample order per the
format); segment tables are JSON with run-length-encoded masks.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import ContainerError, InputError
from .types import (AffinityMap, AffinityPyramid, EmbeddingMap, GridShape,
                    PyramidLevel, SemanticMap)

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"

_TENSORS = (
    ("affinity", lambda lvl: lvl.affinity.values, 4),
    ("semantic", lambda lvl: lvl.semantic.values, None),   # c channels
    ("embedding", lambda lvl: lvl.embedding.values, None),  # k channels
)


def _blob_name(tensor: str, level: int) -> str:
    return f"{tensor}_l{level}.bin"


def _dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def write_pyramid(pyramid: AffinityPyramid, path) -> None:
    """Write a validated pyramid container; lossless against read_pyramid."""
    pyramid.validate()
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "n_levels": pyramid.n_levels,
        "levels": [{"h": lvl.shape.height, "w": lvl.shape.width,
                    "c": pyramid.classes, "k": pyramid.embedding_dim}
                   for lvl in pyramid.levels],
        "class_kinds": [bool(b) for b in pyramid.class_kinds],
        "endianness": "little",
        "dtype": "f32",
    }
    _dump_json(path / MANIFEST_NAME, manifest)
    for i, lvl in enumerate(pyramid.levels, start=1):
        for tensor, get, _ in _TENSORS:
            arr = np.ascontiguousarray(get(lvl), dtype="<f4")
            (path / _blob_name(tensor, i)).write_bytes(arr.tobytes())


def read_pyramid(path) -> AffinityPyramid:
    """Read and fully validate a pyramid container."""
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ContainerError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ContainerError(f"unreadable manifest {manifest_path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContainerError(f"unsupported format_version {manifest.get('format_version')!r}")
    if manifest.get("dtype") != "f32" or manifest.get("endianness") != "little":
        raise ContainerError("containers must declare dtype f32 and little endianness")
    level_specs = manifest.get("levels")
    if not isinstance(level_specs, list) or len(level_specs) != manifest.get("n_levels"):
        raise ContainerError("manifest n_levels does not match the level list")

    levels = []
    for i, spec in enumerate(level_specs, start=1):
        h, w, c, k = (int(spec[key]) for key in ("h", "w", "c", "k"))
        parts = {}
        for tensor, _, fixed in _TENSORS:
            channels = fixed if fixed is not None else (c if tensor == "semantic" else k)
            blob = path / _blob_name(tensor, i)
            if not blob.is_file():
                raise ContainerError(f"level {i} {tensor}: missing blob {blob.name}")
            raw = blob.read_bytes()
            expected = 4 * channels * h * w
            if len(raw) != expected:
                raise ContainerError(
                    f"level {i} {tensor}: blob {blob.name} holds {len(raw)} bytes, "
                    f"expected {expected}")
            arr = np.frombuffer(raw, dtype="<f4").reshape(channels, h, w)
            if not np.isfinite(arr).all():
                raise ContainerError(f"level {i} {tensor}: non-finite values")
            parts[tensor] = arr.astype(np.float32)
        try:
            level = PyramidLevel(AffinityMap(parts["affinity"]),
                                 SemanticMap(parts["semantic"]),
                                 EmbeddingMap(parts["embedding"]))
        except InputError as exc:
            raise ContainerError(f"level {i}: {exc}") from exc
        for tensor, tmap in (("affinity", level.affinity), ("semantic", level.semantic),
                             ("embedding", level.embedding)):
            try:
                tmap.validate()
            except InputError as exc:
                raise ContainerError(f"level {i} {tensor}: {exc}") from exc
        levels.append(level)

    pyramid = AffinityPyramid(levels, np.asarray(manifest.get("class_kinds", []), dtype=bool))
    try:
        pyramid.validate()
    except InputError as exc:
        raise ContainerError(str(exc)) from exc
    return pyramid


# -- label images (16-bit binary PGM) ---------------------------------------

def write_label_image(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise InputError("label image must be 2-D")
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 65535:
        raise InputError("label image values must fit in uint16")
    h, w = labels.shape
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + labels.astype(">u2").tobytes())


def read_label_image(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5" or fields[3] != b"65535":
        raise ContainerError(f"{path}: expected a 16-bit binary PGM")
    w, h = int(fields[1]), int(fields[2])
    data = raw[pos + 1 :]
    if len(data) != 2 * h * w:
        raise ContainerError(f"{path}: pixel payload has {len(data)} bytes, expected {2 * h * w}")
    return np.frombuffer(data, dtype=">u2").reshape(h, w).astype(np.int32)


# -- segment tables ----------------------------------------------------------

def encode_rle(mask: np.ndarray) -> list:
    """Row-major run-length encoding: [start, length, start, length, ...]."""
    flat = np.asarray(mask, dtype=bool).ravel()
    padded = np.concatenate([[False], flat, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts = edges[0::2]
    lengths = edges[1::2] - starts
    out = []
    for s, n in zip(starts, lengths):
        out.extend((int(s), int(n)))
    return out


def decode_rle(runs, shape) -> np.ndarray:
    flat = np.zeros(shape[0] * shape[1], dtype=bool)
    if len(runs) % 2:
        raise ContainerError("RLE runs must come in (start, length) pairs")
    for i in range(0, len(runs), 2):
        s, n = runs[i], runs[i + 1]
        if s < 0 or n < 0 or s + n > flat.size:
            raise ContainerError("RLE run exceeds the mask size")
        flat[s : s + n] = True
    return flat.reshape(shape)


def write_segment_table(path, instances, input_shape, config: dict) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "input_shape": [int(input_shape[0]), int(input_shape[1])],
        "config": config,
        "instances": [
            {
                "id": inst.id,
                "class_id": inst.class_id,
                "score": float(inst.score),
                "pixel_count": int(inst.pixel_count),
                "bbox": [int(b) for b in inst.bbox],
                "rle": encode_rle(inst.mask),
            }
            for inst in instances
        ],
    }
    _dump_json(Path(path), payload)


def read_segment_table(path) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ContainerError(f"unreadable segment table {path}: {exc}") from exc
    if payload.get("format_version") != FORMAT_VERSION:
        raise ContainerError(f"unsupported segment table version in {path}")
    return payload
