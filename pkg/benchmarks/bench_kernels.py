"""Time the compiled and pure-Python simulation kernels on the canonical model.

    python benchmarks/bench_kernels.py [--scale 1.0]

Each kernel runs once per backend on identical streams; the outputs are
compared so a speedup is never reported for kernels that disagree.
"""
import argparse
import time

import numpy as np

from availbound import ModelParams, SystemState, kernels
from availbound import rng as rngmod

SEED = 1


def availability(model, n):
    grid = np.array([0, 0.5, 1, 2, 5, 10, 20, 50, 100], dtype=float)
    gens = rngmod.bit_generators(SEED, "bench/availability", 0, n)
    return kernels.availability_block(model, gens, np.ones(n, dtype=np.int_), np.zeros(n), False, grid)


def coupling(model, n):
    gens = rngmod.bit_generators(SEED, "bench/coupling", 0, n)
    return kernels.coupling_block(model, gens, SystemState.parse("1:0"), SystemState.parse("2:0"),
                                  10_000_000)


def splice(model, n):
    return kernels.splice_block(model, 2.0, 5.0, rngmod.bit_generator(SEED, "bench/splice"), n)


CASES = [("availability (trajectories to t=100)", availability, 20_000),
         ("coupling (paired runs)", coupling, 20_000),
         ("splice (coupled draws)", splice, 200_000)]


def timed(fn, model, n, backend):
    kernels.set_backend(backend)
    t0 = time.perf_counter()
    out = fn(model, n)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0, help="multiply every problem size")
    args = ap.parse_args()
    if not kernels.COMPILED_AVAILABLE:
        raise SystemExit("compiled kernels are not built; run pip install -e . first")
    model = ModelParams.pareto()
    print(f"{'kernel':40s} {'n':>8s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}  same")
    for name, fn, n in CASES:
        n = max(1, int(n * args.scale))
        tc, oc = timed(fn, model, n, "cython")
        tp, op = timed(fn, model, n, "python")
        same = all(np.array_equal(a, b) for a, b in zip(oc, op))
        print(f"{name:40s} {n:8d} {tc:10.3f} {tp:10.3f} {tp / tc:8.1f}  {same}")
    kernels.set_backend("cython")


if __name__ == "__main__":
    main()
