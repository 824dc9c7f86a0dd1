"""Kernel backend selection: compiled extension if built, numpy otherwise.

The two implementations share an exact integer contract, so which one runs is
a speed decision only. ``backend()`` reports the active choice; the threaded
driver splits work into fixed-size chunks so totals are independent of the
thread count.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

try:
    from . import _pairs as _impl

    COMPILED = True
except ImportError:
    from . import _pairs_py as _impl

    COMPILED = False

__all__ = ["COMPILED", "backend", "pair_counts_all", "sorted_inversions"]

# Rows per work unit; fixed so per-chunk sums do not depend on thread count.
_CHUNK_ROWS = 2048


def backend() -> str:
    return "compiled" if COMPILED else "pure"


def pair_counts_all(a: np.ndarray, b: np.ndarray, threads: int = 1):
    """Classify every (i < j) pair of the two aligned arrays.

    Returns (concordant, discordant, tied_a_only, tied_b_only, tied_both)
    as Python integers.
    """
    n = a.shape[0]
    bounds = [(lo, min(lo + _CHUNK_ROWS, n)) for lo in range(0, n, _CHUNK_ROWS)]
    if threads <= 1 or len(bounds) <= 1:
        parts = [_impl.pair_counts(a, b, lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(lambda span: _impl.pair_counts(a, b, span[0], span[1]), bounds)
            )
    totals = [0, 0, 0, 0, 0]
    for part in parts:
        for k in range(5):
            totals[k] += int(part[k])
    return tuple(totals)


def sorted_inversions(b: np.ndarray) -> int:
    """Strict inversion count of a copy of ``b`` (input left untouched)."""
    return int(_impl.sorted_inversions(np.array(b, dtype=np.float64, copy=True)))
