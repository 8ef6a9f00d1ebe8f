#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallbacks.

Runs each hot kernel on identical random inputs through both code paths,
reporting wall time and the maximum output difference. Requires numba to be
importable (run without METASEG_DISABLE_NUMBA so the fast path exists).

Usage: python benchmarks/bench_kernels.py [--size 256] [--repeats 5]
"""

import argparse
import time

import numpy as np

from metaseg import _kernels


def _time(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_dispersion(rng, size, repeats):
    probs = rng.dirichlet(np.ones(12), size=(size, size))
    inv = 1.0 / np.log(12)
    contig = np.ascontiguousarray(probs)
    _kernels._dispersion_loop(contig, inv)  # jit warm-up
    t_fast, (e1, d1, c1) = _time(lambda: _kernels._dispersion_loop(contig, inv), repeats)
    t_slow, (e2, d2, c2) = _time(lambda: _kernels._dispersion_numpy(probs, inv), repeats)
    diff = max(np.abs(e1 - e2).max(), np.abs(d1 - d2).max(), np.abs(c1 - c2).max())
    return t_fast, t_slow, diff


def bench_labeling(rng, size, repeats):
    classes = rng.integers(0, 5, size=(size, size)).astype(np.int32)
    ignore = np.zeros((size, size), dtype=bool)
    _kernels._label_loop(classes, ignore)

    def fast():
        return _kernels._renumber_first_encounter(_kernels._label_loop(classes, ignore))

    def slow():
        return _kernels._renumber_first_encounter(_kernels._label_numpy(classes, ignore))

    t_fast, (s1, n1) = _time(fast, repeats)
    t_slow, (s2, n2) = _time(slow, repeats)
    assert n1 == n2
    return t_fast, t_slow, float(np.abs(s1 - s2).max())


def bench_interior(rng, size, repeats):
    classes = rng.integers(0, 5, size=(size, size)).astype(np.int32)
    seg, _ = _kernels.label_components(classes)
    _kernels._interior_loop(seg)
    t_fast, m1 = _time(lambda: _kernels._interior_loop(seg), repeats)
    t_slow, m2 = _time(lambda: _kernels._interior_numpy(seg), repeats)
    return t_fast, t_slow, float(np.abs(m1 ^ m2).max())


def bench_solver(rng, repeats):
    n, p = 2000, 20
    X = rng.normal(size=(n, p))
    X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    y = (X @ rng.normal(size=p) + rng.normal(scale=2.0, size=n) > 0).astype(np.float64)
    lam = 0.002
    args = (X, y, np.zeros(p), 0.0, lam, 10_000, 1e-8, 1e-10)
    _kernels._logistic_cd_loop(*args)
    t_fast, (w1, b1, _, _) = _time(lambda: _kernels._logistic_cd_loop(*args), repeats)
    t_slow, (w2, b2, _, _) = _time(lambda: _kernels._logistic_cd_numpy(*args), repeats)
    diff = max(float(np.abs(w1 - w2).max()), abs(b1 - b2))
    return t_fast, t_slow, diff


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256, help="image side length")
    ap.add_argument("--repeats", type=int, default=5, help="timing repeats (best-of)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not _kernels.NUMBA_ENABLED:
        raise SystemExit("numba path unavailable (METASEG_DISABLE_NUMBA set or numba missing)")

    rng = np.random.default_rng(args.seed)
    rows = [
        ("dispersion maps", *bench_dispersion(rng, args.size, args.repeats)),
        ("component labeling", *bench_labeling(rng, args.size, args.repeats)),
        ("interior mask", *bench_interior(rng, args.size, args.repeats)),
        ("l1 logistic solver", *bench_solver(rng, args.repeats)),
    ]
    print(f"{'kernel':<20}{'numba':>10}{'numpy':>10}{'speedup':>9}{'max diff':>11}")
    for name, t_fast, t_slow, diff in rows:
        print(f"{name:<20}{t_fast * 1e3:>8.2f}ms{t_slow * 1e3:>8.2f}ms{t_slow / t_fast:>8.1f}x{diff:>11.2e}")


if __name__ == "__main__":
    main()
