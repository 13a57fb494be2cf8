# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot loops: coincidence histogramming, dead-time filtering and
greedy arrival-time pairing. Semantics identical to spsim._kernels._py."""

import numpy as np


def coincidence_histogram(a, b, long long tau_min, long long tau_max,
                          long long bin_width):
    counts = np.zeros((tau_max - tau_min) // bin_width, dtype=np.int64)
    cdef long long[::1] av = a
    cdef long long[::1] bv = b
    cdef long long[::1] cv = counts
    cdef Py_ssize_t na = av.shape[0]
    cdef Py_ssize_t nb = bv.shape[0]
    cdef Py_ssize_t i, j, lo = 0, hi = 0
    cdef long long ai
    with nogil:
        for i in range(na):
            ai = av[i]
            while lo < nb and bv[lo] - ai < tau_min:
                lo += 1
            if hi < lo:
                hi = lo
            while hi < nb and bv[hi] - ai < tau_max:
                hi += 1
            for j in range(lo, hi):
                cv[(bv[j] - ai - tau_min) // bin_width] += 1
    return counts


def min_separation_filter(tags, long long min_sep):
    cdef long long[::1] tv = tags
    cdef Py_ssize_t n = tv.shape[0]
    if n == 0:
        return tags.copy()
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t i, k = 1
    cdef long long last = tv[0]
    ov[0] = last
    with nogil:
        for i in range(1, n):
            if tv[i] - last >= min_sep:
                ov[k] = tv[i]
                last = tv[i]
                k += 1
    return out[:k].copy()


def greedy_pairs(times, long long gate):
    cdef long long[::1] tv = times
    cdef Py_ssize_t n = tv.shape[0]
    partner = np.full(n, -1, dtype=np.int64)
    if n < 2:
        return partner, 0
    cdef long long[::1] pv = partner
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t n_multi = 0, run = 1
    with nogil:
        while i < n - 1:
            if tv[i + 1] - tv[i] <= gate:
                pv[i] = i + 1
                pv[i + 1] = i
                i += 2
            else:
                i += 1
        # diagnostic: count clusters of >=3 mutually linked arrivals
        for i in range(1, n):
            if tv[i] - tv[i - 1] <= gate:
                run += 1
            else:
                if run >= 3:
                    n_multi += 1
                run = 1
        if run >= 3:
            n_multi += 1
    return partner, n_multi
