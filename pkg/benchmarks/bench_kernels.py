#!/usr/bin/env python3
"""Benchmark the numba and numpy kernel backends against each other.

Times the two hot operations (separable valid-mode correlation and
separable resize) on realistic workloads, verifies that both backends
return bit-identical arrays, and prints a fixed-width comparison table.

Usage:
    python benchmarks/bench_kernels.py [--repeats N] [--sizes 256,512]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mrisr import kernels
from mrisr.metrics import gaussian_kernel1d
from mrisr.resample import resize_weights


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _workloads(sizes: list[int]):
    rng = np.random.default_rng(0)
    ssim_kernel = gaussian_kernel1d(11, 1.5)
    vif_kernel = gaussian_kernel1d(17, 17 / 5.0)
    for size in sizes:
        img = rng.random((size, size))
        yield f"correlate 11-tap  {size}x{size}", lambda i=img: kernels.correlate_valid(i, ssim_kernel)
        yield f"correlate 17-tap  {size}x{size}", lambda i=img: kernels.correlate_valid(i, vif_kernel)

        down = resize_weights(size, size // 4, "bilinear")
        yield (
            f"downscale x4 bl   {size}->{size // 4}",
            lambda i=img, w=down: kernels.resize_separable(i, w[0], w[1], w[0], w[1]),
        )
        small = rng.random((size // 4, size // 4))
        up = resize_weights(size // 4, size, "bicubic")
        yield (
            f"upscale x4 bc     {size // 4}->{size}",
            lambda i=small, w=up: kernels.resize_separable(i, w[0], w[1], w[0], w[1]),
        )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7, help="best-of-N timing")
    parser.add_argument("--sizes", default="256,512", help="comma-separated square image sizes")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = ["numpy"]
    if kernels.get_backend() == "numba":  # importable and not disabled via MRISR_NO_NUMBA
        backends.append("numba")
    else:
        print("numba backend disabled or unavailable; timing the numpy backend only\n")

    workloads = list(_workloads(sizes))

    results: dict[str, dict[str, float]] = {name: {} for name, _ in workloads}
    reference: dict[str, np.ndarray] = {}
    for backend in backends:
        kernels.set_backend(backend)
        for name, fn in workloads:
            fn()  # warm-up (JIT compile on the numba path)
            results[name][backend] = _best_of(fn, args.repeats)
            out = fn()
            if name in reference:
                assert np.array_equal(reference[name], out), f"backend mismatch on {name}"
            else:
                reference[name] = out

    width = max(len(name) for name, _ in workloads)
    header = f"{'workload':<{width}}  " + "".join(f"{b + ' (ms)':>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, _ in workloads:
        row = f"{name:<{width}}  "
        row += "".join(f"{results[name][b] * 1e3:>12.3f}" for b in backends)
        if len(backends) == 2:
            row += f"{results[name]['numpy'] / results[name]['numba']:>9.1f}x"
        print(row)
    if len(backends) == 2:
        print("\nboth backends returned bit-identical outputs on every workload")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
