"""Fallback pair kernels: numpy broadcasting for counting, list merge for inversions.

Same contracts as the compiled module; used when the extension is unavailable.
"""

import numpy as np

# Bound on the rows-times-n footprint of one broadcast block.
_BLOCK_CELLS = 1 << 22


def pair_counts(a, b, start, stop):
    """Classify all pairs (i, j) with start <= i < stop and i < j < n.

    Returns (concordant, discordant, tied_a_only, tied_b_only, tied_both).
    """
    n = a.shape[0]
    if start < 0 or stop > n:
        raise ValueError("row range out of bounds")
    conc = disc = ta = tb = tboth = 0
    step = max(1, _BLOCK_CELLS // max(n, 1))
    cols = np.arange(n)
    for lo in range(start, stop, step):
        hi = min(lo + step, stop)
        da = a[lo:hi, None] - a[None, :]
        db = b[lo:hi, None] - b[None, :]
        upper = cols[None, :] > np.arange(lo, hi)[:, None]
        za = da == 0.0
        zb = db == 0.0
        tboth += int(np.count_nonzero(za & zb & upper))
        ta += int(np.count_nonzero(za & ~zb & upper))
        tb += int(np.count_nonzero(~za & zb & upper))
        live = ~za & ~zb & upper
        same = (da > 0.0) == (db > 0.0)
        conc += int(np.count_nonzero(same & live))
        disc += int(np.count_nonzero(~same & live))
    return conc, disc, ta, tb, tboth


def sorted_inversions(b):
    """Count strict inversions (i < j with b[i] > b[j]); sorts b in place."""
    n = b.shape[0]
    if n < 2:
        return 0
    work = list(b)
    tmp = [0.0] * n
    swaps = 0
    width = 1
    while width < n:
        for lo in range(0, n - width, 2 * width):
            mid = lo + width
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if work[j] < work[i]:
                    tmp[k] = work[j]
                    j += 1
                    swaps += mid - i
                else:
                    tmp[k] = work[i]
                    i += 1
                k += 1
            while i < mid:
                tmp[k] = work[i]
                i += 1
                k += 1
            while j < hi:
                tmp[k] = work[j]
                j += 1
                k += 1
            work[lo:hi] = tmp[lo:hi]
        width *= 2
    b[:] = work
    return swaps
