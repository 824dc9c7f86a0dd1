# cython: boundscheck=False, wraparound=False, cdivision=True
"""Pair-classification kernels for rank correlation on double arrays."""

import numpy as np


def pair_counts(const double[::1] a, const double[::1] b,
                Py_ssize_t start, Py_ssize_t stop):
    """Classify all pairs (i, j) with start <= i < stop and i < j < n.

    Returns (concordant, discordant, tied_a_only, tied_b_only, tied_both).
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j
    cdef double da, db
    cdef long long conc = 0, disc = 0, ta = 0, tb = 0, tboth = 0
    if start < 0 or stop > n:
        raise ValueError("row range out of bounds")
    with nogil:
        for i in range(start, stop):
            for j in range(i + 1, n):
                da = a[i] - a[j]
                db = b[i] - b[j]
                if da == 0.0 and db == 0.0:
                    tboth += 1
                elif da == 0.0:
                    ta += 1
                elif db == 0.0:
                    tb += 1
                elif (da > 0.0) == (db > 0.0):
                    conc += 1
                else:
                    disc += 1
    return conc, disc, ta, tb, tboth


def sorted_inversions(double[::1] b):
    """Count strict inversions (i < j with b[i] > b[j]); sorts b in place."""
    cdef Py_ssize_t n = b.shape[0]
    cdef double[::1] tmp
    cdef long long swaps = 0
    cdef Py_ssize_t width = 1, lo, mid, hi, i, j, k
    if n < 2:
        return 0
    tmp = np.empty(n, dtype=np.float64)
    with nogil:
        while width < n:
            lo = 0
            while lo + width < n:
                mid = lo + width
                hi = lo + 2 * width
                if hi > n:
                    hi = n
                i = lo
                j = mid
                k = lo
                while i < mid and j < hi:
                    if b[j] < b[i]:
                        tmp[k] = b[j]
                        j += 1
                        swaps += mid - i
                    else:
                        tmp[k] = b[i]
                        i += 1
                    k += 1
                while i < mid:
                    tmp[k] = b[i]
                    i += 1
                    k += 1
                while j < hi:
                    tmp[k] = b[j]
                    j += 1
                    k += 1
                for i in range(lo, hi):
                    b[i] = tmp[i]
                lo += 2 * width
            width *= 2
    return swaps
