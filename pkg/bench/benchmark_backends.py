"""Timing comparison of the numba and pure-numpy kernel backends.

The backend is frozen at import time, so each measurement runs in a child
process with WSPECTRA_BACKEND set accordingly.  The parent merges the two
runs into one table with speedup factors.  First calls are excluded from
the timings, which on the numba side also absorbs JIT compilation.

Run as: python3 bench/benchmark_backends.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _problems():
    rng = np.random.default_rng(2024)
    n, bw = 20000, 4
    diags = rng.standard_normal((bw + 1, n))
    x = rng.standard_normal(n)

    ks = np.arange(-8, 9)
    ks = ks[ks != 0]
    coeffs = rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)
    z = np.exp(rng.uniform(np.log(0.05), 0.0, 50000)
               + 1j * rng.uniform(0, 2 * np.pi, 50000))

    w, u, v = rng.standard_normal((3, 400000))
    return [
        ("banded_sym_matvec (n=20000, bw=4)",
         lambda k: k.banded_sym_matvec(diags, x)),
        ("laurent_gradient (50k pts, 16 modes)",
         lambda k: k.laurent_gradient_samples(1.0, ks, coeffs, z)),
        ("weighted_form (n=400000)",
         lambda k: k.weighted_form(w, u, v)),
    ]


def run_worker(repeats):
    from wspectra import kernels

    rows = []
    for name, fn in _problems():
        fn(kernels)  # warmup; JIT compile on the numba path
        best = min(
            (lambda t0: (fn(kernels), time.perf_counter() - t0)[1])(
                time.perf_counter())
            for _ in range(repeats)
        )
        rows.append({"name": name, "seconds": best})
    json.dump({"backend": kernels.BACKEND, "rows": rows}, sys.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--worker", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    if args.worker:
        run_worker(args.repeats)
        return 0

    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, WSPECTRA_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__),
             "--worker", "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True, check=True,
        )
        data = json.loads(out.stdout)
        if data["backend"] != backend:
            print(f"note: requested {backend}, got {data['backend']} "
                  "(numba unavailable?)")
        results[backend] = {r["name"]: r["seconds"] for r in data["rows"]}

    names = list(results["numba"])
    width = max(len(n) for n in names)
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name in names:
        tb, tp = results["numba"][name], results["numpy"][name]
        print(f"{name:<{width}}  {tb:>9.2e}s  {tp:>9.2e}s  {tp / tb:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
