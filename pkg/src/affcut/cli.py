"""Command-line surface.

Subcommands: ``partition`` (pyramid container -> instance masks + segment
table), ``synth`` (write synthetic containers + ground truth), ``eval``
(AP report from prediction/ground-truth directories), ``bench`` (runtime
sweep CSV), ``oracle`` (exact multicut of a small edge list) and ``api``
(JSON-over-stdio access to the reference functions, used by language
bindings). All randomness flows from ``--seed``; identical invocations
produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import (CascadeConfig, ScoredInstance, cascade_gaec,
                      instance_label_image, render_instances)
from .container import (read_label_image, read_pyramid, read_segment_table,
                        write_label_image, write_pyramid, write_segment_table,
                        decode_rle, _dump_json)
from .errors import AffcutError, InputError
from .losses import (GroundTruthScene, grouping_losses, phi,
                     semantic_affinity_losses)
from .metrics import GtInstance, ap_report, runtime_profile
from .oracle import exact_multicut
from .synth import (SceneSpec, SyntheticScene, benchmark_spec, generate_pyramid,
                    generate_scene)
from .types import AffinityMap, EmbeddingMap, GridShape, SemanticMap


def _worker_cap() -> int:
    env = os.environ.get("AFFCUT_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise InputError(f"AFFCUT_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def _partition_config(args) -> CascadeConfig:
    return CascadeConfig(
        threshold=args.threshold,
        beta=args.beta,
        gas_enabled=args.gas,
        pa_gaec_enabled=not args.no_pa_gaec,
        seed=args.seed,
        min_pixels=args.min_pixels,
    )


def _run_partition_to_dir(pyramid, cfg: CascadeConfig, out_dir: Path,
                          write_labels: bool = True):
    result = cascade_gaec(pyramid, cfg)
    level1 = pyramid.levels[0].shape
    input_shape = GridShape(4 * level1.height, 4 * level1.width)
    instances = render_instances(result.labels, result.segments, input_shape,
                                 pyramid.class_kinds, cfg.min_pixels)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_echo = {
        "threshold": cfg.threshold,
        "beta": cfg.beta,
        "gas": cfg.gas_enabled,
        "pa_gaec": cfg.pa_gaec_enabled,
        "seed": cfg.seed,
        "min_pixels": cfg.min_pixels,
    }
    write_segment_table(out_dir / "segments.json", instances, tuple(input_shape), config_echo)
    if write_labels:
        write_label_image(out_dir / "labels.pgm", instance_label_image(instances, input_shape))
    return instances


def _cmd_partition(args) -> int:
    pyramid = read_pyramid(args.pyramid)
    instances = _run_partition_to_dir(pyramid, _partition_config(args),
                                      Path(args.output), not args.no_label_image)
    print(f"{len(instances)} instances -> {args.output}")
    return 0


def _write_scene(scene: SyntheticScene, out_dir: Path) -> None:
    write_pyramid(scene.pyramid, out_dir)
    write_label_image(out_dir / "gt_labels.pgm", scene.gt.labels)
    gt = {
        "shape": list(scene.gt.labels.shape),
        "classes": scene.spec.classes,
        "class_kinds": [bool(b) for b in scene.spec.class_kinds],
        "instances": [
            {"id": info.id, "class_id": info.class_id,
             "pixel_count": int(np.count_nonzero(scene.gt.labels == info.id)),
             "bbox": list(info.bbox)}
            for info in scene.level_tables[0]
        ],
        "level_tables": [
            [{"id": i.id, "class_id": i.class_id, "pixel_count": i.pixel_count,
              "bbox": list(i.bbox), "n_components": i.n_components} for i in table]
            for table in scene.level_tables
        ],
    }
    _dump_json(out_dir / "gt.json", gt)


def _cmd_synth(args) -> int:
    spec = SceneSpec.from_dict(json.loads(Path(args.spec).read_text())) if args.spec \
        else SceneSpec()
    out = Path(args.output)
    if args.count == 1 and not args.scene_subdirs:
        scene = generate_scene(spec if args.seed is None
                               else SceneSpec.from_dict({**spec.to_dict(), "seed": args.seed}))
        _write_scene(scene, out)
        print(f"scene seed={scene.spec.seed} -> {out}")
        return 0
    base = spec.seed if args.seed is None else args.seed
    for i in range(args.count):
        scene = generate_scene(SceneSpec.from_dict({**spec.to_dict(), "seed": base + i}))
        _write_scene(scene, out / f"scene_{i:03d}")
    print(f"{args.count} scenes -> {out}")
    return 0


def _load_gt_dir(gt_dir: Path):
    payload = json.loads((gt_dir / "gt.json").read_text())
    labels = read_label_image(gt_dir / "gt_labels.pgm")
    instances = [GtInstance(mask=labels == inst["id"], class_id=int(inst["class_id"]))
                 for inst in payload["instances"]]
    return instances


def _load_pred_dir(pred_dir: Path):
    payload = read_segment_table(pred_dir / "segments.json")
    h, w = payload["input_shape"]
    preds = []
    for inst in payload["instances"]:
        preds.append(ScoredInstance(
            id=int(inst["id"]),
            class_id=int(inst["class_id"]),
            score=float(inst["score"]),
            mask=decode_rle(inst["rle"], (h, w)),
            pixel_count=int(inst["pixel_count"]),
        ))
    return preds


def _scene_pairs(pred_root: Path, gt_root: Path):
    if (pred_root / "segments.json").is_file():
        return [(pred_root, gt_root)]
    pairs = []
    for sub in sorted(p for p in pred_root.iterdir() if p.is_dir()):
        gt_sub = gt_root / sub.name
        if not (gt_sub / "gt.json").is_file():
            raise InputError(f"no ground truth for scene {sub.name}")
        pairs.append((sub, gt_sub))
    if not pairs:
        raise InputError(f"no predictions found under {pred_root}")
    return pairs


def _cmd_eval(args) -> int:
    pairs = _scene_pairs(Path(args.pred), Path(args.gt))

    def load(pair):
        pred_dir, gt_dir = pair
        return _load_pred_dir(pred_dir), _load_gt_dir(gt_dir)

    workers = min(_worker_cap(), len(pairs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scenes = list(pool.map(load, pairs))
    else:
        scenes = [load(p) for p in pairs]
    report = ap_report(scenes)
    payload = {
        "mean_ap": report.mean_ap,
        "ap50": report.ap50,
        "per_class": {str(c): v for c, v in sorted(report.per_class.items())},
        "n_scenes": len(scenes),
    }
    _dump_json(Path(args.output), payload)
    print(f"mean AP {report.mean_ap:.4f} | AP50 {report.ap50:.4f} -> {args.output}")
    return 0


def _parse_sizes(text: str):
    sizes = []
    for chunk in text.split(","):
        chunk = chunk.strip().lower()
        if "x" in chunk:
            h, w = chunk.split("x")
        else:
            h = w = chunk
        sizes.append((int(h), int(w)))
    return sizes


def _cmd_bench(args) -> int:
    cfg = CascadeConfig(seed=args.seed)

    def make(shape):
        # sizes name the pyramid's finest level; the scene is 4x linear
        h, w = shape
        return generate_pyramid(benchmark_spec((4 * h, 4 * w), seed=args.seed,
                                               jitter=args.jitter,
                                               flip_rate=args.flip_rate))

    def partition(pyr):
        # the partition deliverable: labels plus rendered instance masks
        result = cascade_gaec(pyr, cfg)
        level1 = pyr.levels[0].shape
        render_instances(result.labels, result.segments,
                         GridShape(4 * level1.height, 4 * level1.width),
                         pyr.class_kinds, cfg.min_pixels)

    result = runtime_profile(_parse_sizes(args.sizes), make, partition,
                             repeats=args.repeats)
    Path(args.output).write_text(result.to_csv())
    print(result.to_csv(), end="")
    print(f"log-log slope {result.slope:.3f} (r^2 {result.r_squared:.4f})")
    if args.report:
        _dump_json(Path(args.report), {
            "slope": result.slope,
            "r_squared": result.r_squared,
            "rows": [{"pixels": r.pixels, "seconds_median": r.seconds_median,
                      "seconds_p95": r.seconds_p95} for r in result.rows],
        })
    return 0


def _cmd_oracle(args) -> int:
    edges = []
    n = 0
    for line_no, line in enumerate(Path(args.edgelist).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InputError(f"{args.edgelist}:{line_no}: expected 'u v cost'")
        u, v, c = int(parts[0]), int(parts[1]), float(parts[2])
        edges.append((u, v, c))
        n = max(n, u + 1, v + 1)
    if n == 0:
        raise InputError(f"{args.edgelist}: no edges")
    solution = exact_multicut(n, edges, cap=args.cap)
    print(f"optimal cost {solution.cost:.6f}")
    for block in solution.blocks:
        print("block " + " ".join(str(v) for v in block))
    return 0


def _api_phi(payload: dict) -> dict:
    alpha = payload.get("alpha")
    kwargs = {} if alpha is None else {"alpha": float(alpha)}
    return {"value": phi(payload["x_a"], payload["x_b"], **kwargs)}


def _api_scene(payload: dict) -> GroundTruthScene:
    labels = np.asarray(payload["labels"], dtype=np.int32)
    class_of_id = np.asarray(payload["class_of_id"], dtype=np.int64)
    return GroundTruthScene.from_labels(labels, class_of_id, int(payload["classes"]))


def _api_grouping(payload: dict) -> dict:
    gt = _api_scene(payload)
    emb = EmbeddingMap(np.asarray(payload["embedding"], dtype=np.float32))
    result = grouping_losses(emb, gt)
    return {"push": result.push, "pull": result.pull, "n_instances": result.n_instances}


def _api_semantic_affinity(payload: dict) -> dict:
    gt = _api_scene(payload)
    sem = SemanticMap(np.asarray(payload["semantic"], dtype=np.float32))
    aff = AffinityMap(np.asarray(payload["affinity"], dtype=np.float32))
    weights = payload.get("weights")
    result = semantic_affinity_losses(sem, aff, gt,
                                      None if weights is None else np.asarray(weights))
    return {"semantic": result.semantic, "boundary": result.boundary,
            "solid": result.solid, "n_boundary": result.n_boundary,
            "n_solid": result.n_solid}


_API_FUNCTIONS = {
    "phi": _api_phi,
    "grouping_losses": _api_grouping,
    "semantic_affinity_losses": _api_semantic_affinity,
}


def _cmd_api(args) -> int:
    payload = json.loads(sys.stdin.read())
    result = _API_FUNCTIONS[args.function](payload)
    sys.stdout.write(json.dumps(result, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="affcut",
                                     description="Greedy multicut partitioning "
                                                 "of affinity pyramids")
    parser.add_argument("--version", action="version", version=f"affcut {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="partition a pyramid container")
    p.add_argument("pyramid", help="container directory")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gas", action="store_true",
                   help="resolve the finest level by greedy association")
    p.add_argument("--no-pa-gaec", action="store_true",
                   help="disable position-aware segment merging")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-pixels", type=int, default=16)
    p.add_argument("--no-label-image", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_partition)

    p = sub.add_parser("synth", help="generate synthetic scenes")
    p.add_argument("--spec", help="scene spec JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the scene-spec seed")
    p.add_argument("--count", type=int, default=1,
                   help="number of scenes (> 1 writes scene_NNN subdirectories)")
    p.add_argument("--scene-subdirs", action="store_true",
                   help="write scene_NNN subdirectories even for a single scene")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("eval", help="average precision of predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("-o", "--output", default="report.json")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="runtime scaling sweep")
    p.add_argument("--sizes", default="128x128,256x256,512x512,1024x1024,2048x1024")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=0.05)
    p.add_argument("--flip-rate", type=float, default=0.002)
    p.add_argument("--report", help="optional JSON report path")
    p.add_argument("-o", "--output", default="timings.csv")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("oracle", help="exact multicut of a small edge list")
    p.add_argument("edgelist", help="text file with 'u v cost' lines")
    p.add_argument("--cap", type=int, default=12)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("api", help="evaluate a reference function on JSON from stdin")
    p.add_argument("function", choices=sorted(_API_FUNCTIONS))
    p.set_defaults(func=_cmd_api)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AffcutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
