"""Benchmark the compiled integration kernels against the pure-numpy
fallback on the bundled snapshot's orbits.

Two workloads: the full 164-orbit batch (the fallback amortizes its numpy
overhead across the batch) and a single orbit (the per-step overhead the
compiled loop removes).

Usage: python benchmarks/bench_kernels.py [--steps N]
"""

import argparse
import time

import numpy as np

from gstamp import kernels
from gstamp.catalog import load_reference_snapshot
from gstamp.dynamics import PotentialParams
from gstamp.frames import FrameParams, catalog_phase_space


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(pos, vel, steps, params, label):
    work = pos.shape[0] * steps
    print(f"\n{label}: {pos.shape[0]} orbit(s) x {steps} steps")
    print(f"  {'scheme':<9} {'backend':<9} {'time':>9}  {'steps/s':>12}  speedup")
    for scheme in ("leapfrog", "rk4"):
        times = {}
        for backend in ("pure", "compiled"):
            if backend == "compiled" and not kernels.compiled_available():
                continue
            times[backend] = timeit(lambda: kernels.integrate_batch(
                pos, vel, 0.1, steps, params, scheme, backend))
        for backend, t in times.items():
            speedup = (f"{times['pure'] / t:6.1f}x"
                       if backend == "compiled" else "       ")
            print(f"  {scheme:<9} {backend:<9} {t:8.3f}s  {work / t:12.0f}  {speedup}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=10000, help="steps per orbit")
    args = ap.parse_args()

    cat = load_reference_snapshot()
    pos, vel = catalog_phase_space(cat, FrameParams())
    params = PotentialParams().as_tuple()
    if not kernels.compiled_available():
        print("compiled kernels not built; timing the fallback only")

    bench(pos, vel, args.steps, params, "snapshot batch")
    bench(pos[:1], vel[:1], args.steps, params, "single orbit")

    if kernels.compiled_available():
        pc, vc, ec = kernels.integrate_batch(pos[:4], vel[:4], 0.1, 1000,
                                             params, "leapfrog", "compiled")
        pq, vq, eq = kernels.integrate_batch(pos[:4], vel[:4], 0.1, 1000,
                                             params, "leapfrog", "pure")
        print(f"\nparity: max |dpos| = {np.abs(pc - pq).max():.2e} kpc, "
              f"max |dE/E| = {np.abs((ec - eq) / ec).max():.2e}")


if __name__ == "__main__":
    main()
