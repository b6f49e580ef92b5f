#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

The execution path is fixed at import time by the DEEPNMF_NO_NUMBA
environment variable, so this script re-launches itself in two worker
subprocesses (one per path) and prints a comparison table.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

CASES = [
    ("apg small block", "apg", dict(m=20, n=15, k=5, iters=300)),
    ("apg medium block", "apg", dict(m=200, n=150, k=30, iters=300)),
    ("power iteration", "eig", dict(k=60, iters=2000)),
    ("kmeans assignment", "assign", dict(n=2000, d=40, k=12)),
]


def run_case(kind, params, repeats):
    import numpy as np

    from deepnmf import kernels

    rng = np.random.default_rng(0)
    if kind == "apg":
        m, n, k = params["m"], params["n"], params["k"]
        x = rng.uniform(0.0, 1.0, size=(m, n))
        w = rng.uniform(0.0, 1.0, size=(m, k))
        gram = w.T @ w
        lin = -(w.T @ x)
        lc = float(np.linalg.eigvalsh(gram).max())
        v0 = rng.uniform(0.0, 1.0, size=(k, n))

        def work():
            # rel_tol 0 forces the full iteration budget on both paths.
            kernels.apg_quad_solve(v0, gram, None, lin, 0.0, 0.0, 0.0,
                                   lc, 0.0, params["iters"])
    elif kind == "eig":
        k = params["k"]
        a = rng.standard_normal((k, k))
        gram = a @ a.T
        v0 = np.full(k, 1.0 / np.sqrt(k))

        def work():
            kernels.sym_top_eig(gram, v0, 0.0, params["iters"])
    elif kind == "assign":
        pts = rng.standard_normal((params["n"], params["d"]))
        centers = rng.standard_normal((params["k"], params["d"]))

        def work():
            kernels.kmeans_assign(pts, centers)
    else:
        raise ValueError(kind)

    work()  # warm (JIT compile on the compiled path)
    best = min(_timed(work) for _ in range(repeats))
    return best


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def worker(repeats):
    from deepnmf import kernels

    results = {"numba": kernels.NUMBA_ENABLED}
    for name, kind, params in CASES:
        results[name] = run_case(kind, params, repeats)
    json.dump(results, sys.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        worker(args.repeats)
        return

    timings = {}
    for label, extra_env in (("numba", {}), ("numpy", {"DEEPNMF_NO_NUMBA": "1"})):
        env = dict(os.environ, **extra_env)
        env.pop("DEEPNMF_NO_NUMBA", None) if label == "numba" else None
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True, check=True)
        timings[label] = json.loads(out.stdout)

    assert timings["numba"]["numba"] and not timings["numpy"]["numba"]
    width = max(len(name) for name, _, _ in CASES)
    print(f"{'case':<{width}}  {'numba':>10}  {'numpy':>10}  speedup")
    for name, _, _ in CASES:
        jit = timings["numba"][name]
        pure = timings["numpy"][name]
        print(f"{name:<{width}}  {jit * 1e3:>8.3f}ms  {pure * 1e3:>8.3f}ms  "
              f"{pure / jit:>6.1f}x")


if __name__ == "__main__":
    main()
