"""Time the compiled pair-classification kernels against the numpy fallback.

Both backends share an exact integer contract (asserted here on every run),
so this script is only about speed: how much the Cython extension buys for
pair counting and inversion counting, and what threading adds on top.

Run from the repo root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 2000 8000 --repeats 5
"""

import argparse
import os
import statistics
import time

import numpy as np

from midmetric._kernels import _pairs_py
from midmetric._kernels import pair_counts_all, backend

try:
    from midmetric._kernels import _pairs as _compiled
except ImportError:
    _compiled = None


def _timeit(fn, repeats):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best.append(time.perf_counter() - t0)
    return min(best), statistics.median(best), out


def _judgment_like(n, rng):
    # scores vs coarse human levels: the shape pair_counts actually sees
    a = rng.standard_normal(n)
    b = rng.integers(0, 5, size=n).astype(np.float64)
    return a, b


def bench_pair_counts(sizes, repeats):
    rng = np.random.default_rng(7)
    rows = []
    for n in sizes:
        a, b = _judgment_like(n, rng)
        t_pure, m_pure, ref = _timeit(
            lambda: _pairs_py.pair_counts(a, b, 0, n), repeats
        )
        row = {"n": n, "pure": m_pure}
        if _compiled is not None:
            t_c, m_c, got = _timeit(
                lambda: _compiled.pair_counts(a, b, 0, n), repeats
            )
            assert tuple(got) == tuple(ref), "backends disagree"
            row["compiled"] = m_c
            row["speedup"] = m_pure / m_c if m_c > 0 else float("inf")
            # threaded driver goes through whichever backend is active
            _, m_t4, _ = _timeit(lambda: pair_counts_all(a, b, threads=4), repeats)
            row["driver_t4"] = m_t4
        rows.append(row)
    return rows


def bench_inversions(sizes, repeats):
    rng = np.random.default_rng(11)
    rows = []
    for n in sizes:
        base = rng.standard_normal(n)
        t_pure, m_pure, ref = _timeit(
            lambda: _pairs_py.sorted_inversions(base.copy()), repeats
        )
        row = {"n": n, "pure": m_pure}
        if _compiled is not None:
            t_c, m_c, got = _timeit(
                lambda: _compiled.sorted_inversions(base.copy()), repeats
            )
            assert int(got) == int(ref), "backends disagree"
            row["compiled"] = m_c
            row["speedup"] = m_pure / m_c if m_c > 0 else float("inf")
        rows.append(row)
    return rows


def _print_table(title, rows):
    print(f"\n{title}")
    if not rows:
        return
    has_c = "compiled" in rows[0]
    head = f"{'n':>10} {'pure (ms)':>12}"
    if has_c:
        head += f" {'compiled (ms)':>14} {'speedup':>9}"
        if "driver_t4" in rows[0]:
            head += f" {'driver t=4 (ms)':>16}"
    print(head)
    for r in rows:
        line = f"{r['n']:>10} {r['pure'] * 1e3:>12.3f}"
        if has_c:
            line += f" {r['compiled'] * 1e3:>14.3f} {r['speedup']:>8.1f}x"
            if "driver_t4" in r:
                line += f" {r['driver_t4'] * 1e3:>16.3f}"
        print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument(
        "--sizes", type=int, nargs="+", default=[1000, 4000, 16000],
        help="row counts for the O(n^2) pair-count benchmark",
    )
    ap.add_argument(
        "--inv-sizes", type=int, nargs="+", default=[100_000, 1_000_000],
        help="row counts for the O(n log n) inversion benchmark",
    )
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    print(f"active backend: {backend()}, cpus: {os.cpu_count()}")
    if _compiled is None:
        print("compiled extension not importable; timing the fallback only")

    _print_table(
        "pair_counts (exact O(n^2) classification)",
        bench_pair_counts(args.sizes, args.repeats),
    )
    _print_table(
        "sorted_inversions (merge-sort count)",
        bench_inversions(args.inv_sizes, args.repeats),
    )


if __name__ == "__main__":
    main()
