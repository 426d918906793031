"""Compare the compiled and pure-Python element kernels.

Run with ``python3 benchmarks/bench_kernels.py [--elements N] [--repeat R]``.
Both backends are fed identical random residuals; the script reports the
best wall time per backend, the speed-up, and the largest relative
difference between the two outputs.
"""
import argparse
import time

import numpy as np

from lqgibbs import kernels


def _timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _rel_diff(a, b):
    scale = max(np.max(np.abs(a)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--elements", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    compiled = kernels.compiled_backend()
    if compiled is None:
        print("compiled backend not built; only the Python backend is available")
        return 1
    rng = np.random.default_rng(args.seed)
    n = args.elements
    lengths = rng.uniform(0.01, 1.0, n)
    r1 = rng.normal(size=(n, 2))
    areas = rng.uniform(0.01, 1.0, n)
    r2 = rng.normal(size=(n, 3))

    cases = [
        ("1d odd pow p=0.5", lambda m: m.assemble_1d(lengths, r1, m.ODD_POW, 0.5)),
        ("1d even pow p=-0.5", lambda m: m.assemble_1d(lengths, r1, m.EVEN_POW, -0.5)),
        ("2d odd pow p=0.5", lambda m: m.assemble_2d(areas, r2, m.ODD_POW, 0.5)),
        ("2d smooth eps=1e-6", lambda m: m.assemble_2d(areas, r2, m.ODD_SMOOTH, 0.2, 1e-6)),
    ]
    print(f"{'case':<22}{'python [s]':>12}{'compiled [s]':>14}{'speed-up':>10}{'rel diff':>11}")
    for name, call in cases:
        tp, (vp, mp) = _timed(lambda: call(kernels.python_backend), args.repeat)
        tc, (vc, mc) = _timed(lambda: call(compiled), args.repeat)
        diff = max(_rel_diff(vp, vc), _rel_diff(mp, mc))
        print(f"{name:<22}{tp:>12.4f}{tc:>14.4f}{tp / tc:>10.1f}{diff:>11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
