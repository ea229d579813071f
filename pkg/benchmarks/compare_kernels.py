#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Runs the contraction kernel, the fused graph construction and greedy
association on level-graph workloads extracted from synthetic scenes, plus
the end-to-end partition, once per available backend. Results print as a
table and optionally land in a CSV.

Usage: python benchmarks/compare_kernels.py [--csv out.csv] [--repeats 5]
"""

import argparse
import time

import numpy as np

from affcut import CascadeConfig, GridShape, cascade_gaec, kernels, render_instances
from affcut.construct import build_level_graph, participation_mask
from affcut.cascade import _upsample_unlabel
from affcut.synth import benchmark_spec, generate_pyramid
from affcut.types import BACKGROUND, UNLABELED


def level_one_workload(pyramid):
    """Seeds and tensors for the finest level, derived from a real cascade run."""
    cfg = CascadeConfig()
    prev = None
    from affcut.cascade import _partition_level
    for li in range(len(pyramid.levels) - 1, 0, -1):
        level = pyramid.levels[li]
        part = participation_mask(level.semantic, pyramid.class_kinds)
        th, tw = level.semantic.values.shape[1:]
        if prev is None:
            seeds = np.where(part, np.int32(UNLABELED), np.int32(BACKGROUND))
        else:
            up = _upsample_unlabel(prev, th, tw)
            seeds = np.where(part, np.where(up >= 1, up, np.int32(UNLABELED)),
                             np.int32(BACKGROUND))
        prev, _ = _partition_level(level, seeds, cfg)
    level = pyramid.levels[0]
    part = participation_mask(level.semantic, pyramid.class_kinds)
    th, tw = level.semantic.values.shape[1:]
    up = _upsample_unlabel(prev, th, tw)
    seeds = np.where(part, np.where(up >= 1, up, np.int32(UNLABELED)),
                     np.int32(BACKGROUND))
    return level, seeds


def timeit(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pyramid-size", default="512x512",
                        help="finest-level size of the benchmark pyramid")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--csv")
    args = parser.parse_args()

    h, w = (int(t) for t in args.pyramid_size.lower().split("x"))
    backends = kernels.backends()
    print(f"available backends: {', '.join(backends)} (active: {kernels.BACKEND})")
    pyramid = generate_pyramid(benchmark_spec((4 * h, 4 * w), seed=0))
    level, seeds = level_one_workload(pyramid)
    lg = build_level_graph(level.affinity, level.semantic, level.embedding, seeds)
    print(f"finest level {h}x{w}: {lg.n} vertices, {len(lg.edges_u)} edges, "
          f"{int((seeds == UNLABELED).sum())} unlabeled pixels")

    unl = np.flatnonzero(seeds.ravel() == UNLABELED)
    order = np.random.default_rng(0).permutation(unl)
    aff32 = np.ascontiguousarray(level.affinity.values, dtype=np.float32)

    rows = []
    for name, impl in backends.items():
        t_build = timeit(lambda: kernels.build_graph(
            seeds, level.affinity.values, level.semantic.values,
            level.embedding.values, impl), args.repeats)
        t_gaec = timeit(lambda: kernels.gaec_core(
            lg.n, lg.edges_u, lg.edges_v, lg.edges_a, 0.5, impl), args.repeats)

        def run_gas():
            labels = seeds.copy()
            kernels.gas_sweep(labels, aff32, order, 0.5, impl)

        t_gas = timeit(run_gas, args.repeats)
        rows.append((name, t_build, t_gaec, t_gas))

    print(f"\n{'backend':<10} {'build_graph':>12} {'gaec_core':>12} {'gas_sweep':>12}")
    for name, t_build, t_gaec, t_gas in rows:
        print(f"{name:<10} {t_build*1000:>10.2f}ms {t_gaec*1000:>10.2f}ms "
              f"{t_gas*1000:>10.2f}ms")
    if len(rows) == 2:
        by = dict((r[0], r[1:]) for r in rows)
        speedup = [p / c for p, c in zip(by["python"], by["compiled"])]
        print(f"{'speedup':<10} {speedup[0]:>11.1f}x {speedup[1]:>11.1f}x "
              f"{speedup[2]:>11.1f}x")

    # end-to-end partition per backend
    cfg = CascadeConfig()
    print(f"\n{'backend':<10} {'full partition':>15}")
    end_to_end = []
    for name, impl in backends.items():
        def run():
            result = cascade_gaec(pyramid, cfg)

            level1 = pyramid.levels[0].shape
            render_instances(result.labels, result.segments,
                             GridShape(4 * level1.height, 4 * level1.width),
                             pyramid.class_kinds, cfg.min_pixels)

        previous = kernels.set_backend(name)
        try:
            t = timeit(run, args.repeats)
        finally:
            kernels.set_backend(previous)
        end_to_end.append((name, t))
        print(f"{name:<10} {t*1000:>13.2f}ms")

    if args.csv:
        lines = ["backend,build_graph_s,gaec_core_s,gas_sweep_s,partition_s"]
        for (name, tb, tg, ts), (_, tp) in zip(rows, end_to_end):
            lines.append(f"{name},{tb:.6f},{tg:.6f},{ts:.6f},{tp:.6f}")
        with open(args.csv, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"\nwrote {args.csv}")


if __name__ == "__main__":
    main()
