#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--size 512] [--repeats 5]

The same kernels run in production behind an env flag (SEGQA_NO_NUMBA=1
selects the numpy path); this script calls both implementations directly.
"""

import argparse
import time

import numpy as np

from segqa import _kernels as K
from segqa.synth import SceneSpec, generate_scene


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_labeling(size, repeats):
    rng = np.random.default_rng(0)
    # blobby foreground, the realistic workload for component labeling
    noise = rng.random((size, size))
    from scipy import ndimage

    grid = ndimage.uniform_filter(noise, 9) > 0.5
    rows = []
    for conn in (4, 8):
        eight = conn == 8
        K._label_numba(grid, eight)  # warm up the JIT
        t_nb, (lab_nb, n_nb) = timeit(lambda: K._label_numba(grid, eight), repeats)
        t_np, (lab_np, n_np) = timeit(lambda: K._label_numpy(grid, eight), repeats)
        assert n_nb == n_np and np.array_equal(lab_nb, lab_np)
        rows.append((f"label_components {size}x{size} conn={conn}", t_nb, t_np))
    return rows


def bench_flood(repeats):
    image, truth = generate_scene(SceneSpec(seed=3, width=512, height=512, max_objects=3, max_radius=60))
    luma = image.luma().astype(np.int16)
    ys, xs = np.nonzero(truth.data.any(axis=0))
    sy, sx = int(ys[0]), int(xs[0])
    K._flood_numba(luma, sy, sx, np.int16(12))  # warm up
    t_nb, m_nb = timeit(lambda: K._flood_numba(luma, sy, sx, np.int16(12)), repeats)
    t_np, m_np = timeit(lambda: K._flood_numpy(luma, sy, sx, 12), repeats)
    assert np.array_equal(m_nb, m_np)
    return [("flood_fill_tolerance 512x512", t_nb, t_np)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rows = bench_labeling(args.size, args.repeats) + bench_flood(args.repeats)
    name_w = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{name_w}} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for name, t_nb, t_np in rows:
        print(f"{name:<{name_w}} {t_nb * 1e3:>8.2f}ms {t_np * 1e3:>8.2f}ms {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
