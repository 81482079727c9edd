#!/usr/bin/env python3
"""Benchmark the stage recording kernels: numba JIT vs the pure-numpy fallback.

Both backends consume identical pre-drawn randomness, so outputs must match
bit for bit; only throughput differs.  Run:

    python3 benchmarks/bench_kernels.py [--plays 200000] [--arms 12] [--k 3]
"""

import argparse
import time

import numpy as np

from bestofk import kernels
from bestofk.elimination import stage_play
from bestofk.measures import ProductMeasure, make_planted


def _time_backend(backend, env, u, k1, k2, accept, reject, model, plays, seed):
    rng = np.random.default_rng(seed)
    with kernels.use_backend(backend):
        started = time.perf_counter()
        y, queries = stage_play(env, u, accept, reject, k1, k2, model, plays, rng)
        elapsed = time.perf_counter() - started
    return y, queries, elapsed


def _bench_kernel_only(plays, n, k1, seed):
    """Recording step alone on shared pre-drawn inputs (no rng in the loop)."""
    q = kernels.queries_per_play(n, k1)
    rng = np.random.default_rng(seed)
    bits = (rng.random((plays, q, n)) < 0.4).astype(np.uint8)
    perm = np.argsort(rng.random((plays, n)), axis=1)
    topoff = np.zeros((plays, 0), dtype=np.int64)
    urec = np.arange(n, dtype=np.int64)
    mark_u = rng.random((plays, q))
    header = f"{'kernel only':<20} {'plays':>9} {'numba':>9} {'numpy':>9} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for model in ("bandit", "marked", "semi"):
        warm = np.zeros(n, np.int64)
        kernels.record_plays(bits[:64], perm[:64], topoff[:64], urec, k1, model,
                             mark_u[:64], warm, backend="numba")
        out = {}
        times = {}
        for backend in ("numba", "numpy"):
            y = np.zeros(n, np.int64)
            started = time.perf_counter()
            kernels.record_plays(bits, perm, topoff, urec, k1, model, mark_u, y,
                                 backend=backend)
            times[backend] = time.perf_counter() - started
            out[backend] = y
        assert (out["numba"] == out["numpy"]).all()
        print(f"{model:<20} {plays:>9} {times['numba']:>8.3f}s "
              f"{times['numpy']:>8.3f}s {times['numpy'] / times['numba']:>7.2f}x")
    print()


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--plays", type=int, default=200_000)
    parser.add_argument("--arms", type=int, default=12)
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not kernels.HAS_NUMBA:
        parser.error("numba is not importable; nothing to compare")

    n, k = args.arms, args.k
    workloads = [
        ("semi, full pool", ProductMeasure(means=tuple(np.linspace(0.85, 0.1, n))),
         tuple(range(n)), k, 0, (), ()),
        ("bandit, full pool", ProductMeasure(means=tuple(np.linspace(0.85, 0.1, n))),
         tuple(range(n)), k, 0, (), ()),
        ("marked, top-off", ProductMeasure(means=tuple(np.linspace(0.85, 0.1, n))),
         tuple(range(k - 1)), k - 1, 1, (n - 1,), tuple(range(k - 1, n - 1))),
        ("bandit, planted", make_planted(n, k, 0.4, 0.8), tuple(range(n)), k, 0, (), ()),
    ]

    # warm the JIT outside the timed region
    _time_backend("numba", workloads[0][1], workloads[0][2], k, 0, (), (), "semi", 64, 0)

    _bench_kernel_only(args.plays, n, k, args.seed)

    header = f"{'full stage':<20} {'plays':>9} {'numba':>9} {'numpy':>9} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, env, u, k1, k2, accept, reject in workloads:
        model = name.split(",")[0]
        y1, q1, t1 = _time_backend("numba", env, u, k1, k2, accept, reject,
                                   model, args.plays, args.seed)
        y2, q2, t2 = _time_backend("numpy", env, u, k1, k2, accept, reject,
                                   model, args.plays, args.seed)
        assert (y1 == y2).all() and q1 == q2, f"backend outputs diverged on {name}"
        print(f"{name:<20} {args.plays:>9} {t1:>8.3f}s {t2:>8.3f}s {t2 / t1:>7.2f}x")
    print("\noutputs verified identical across backends")


if __name__ == "__main__":
    main()
