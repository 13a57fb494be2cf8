"""Pure-numpy fallback kernels.

Used automatically when the compiled extension is unavailable (or when
``SPSIM_PURE_PYTHON=1``).  All three kernels are bit-for-bit equivalent to
their compiled counterparts; `min_separation_filter` is the only one that
degrades to a Python-level loop.
"""

import numpy as np

_CHUNK = 1 << 20


def coincidence_histogram(a, b, tau_min, tau_max, bin_width):
    """Histogram of pair delays b[j]-a[i] falling in [tau_min, tau_max).

    counts[k] counts pairs with tau_min + k*bin_width <= b[j]-a[i] <
    tau_min + (k+1)*bin_width.  Both inputs must be sorted int64 arrays.
    """
    n_bins = (tau_max - tau_min) // bin_width
    counts = np.zeros(n_bins, dtype=np.int64)
    for start in range(0, len(a), _CHUNK):
        ac = a[start : start + _CHUNK]
        lo = np.searchsorted(b, ac + tau_min, side="left")
        hi = np.searchsorted(b, ac + tau_max, side="left")
        n_match = hi - lo
        total = int(n_match.sum())
        if total == 0:
            continue
        # flatten the ranges [lo_i, hi_i) into one index vector
        csum = np.cumsum(n_match)
        step = np.ones(total, dtype=np.int64)
        step[0] = lo[0]
        nz = n_match > 0
        prev_hi = np.zeros(len(ac), dtype=np.int64)
        prev_hi[1:] = (lo + n_match)[:-1]
        # at each range boundary jump from previous hi to the new lo
        bounds = csum[:-1][nz[1:]]
        step[bounds] = lo[1:][nz[1:]] - prev_hi[1:][nz[1:]] + 1
        idx_b = np.cumsum(step)
        diffs = b[idx_b] - np.repeat(ac, n_match)
        counts += np.bincount((diffs - tau_min) // bin_width, minlength=n_bins)
    return counts


def min_separation_filter(tags, min_sep):
    """Greedy dead-time filter: keep a tag iff it is at least min_sep after
    the previously kept tag. Input sorted int64, output sorted int64."""
    if len(tags) == 0:
        return tags.copy()
    src = tags.tolist()
    out = [src[0]]
    last = src[0]
    for t in src[1:]:
        if t - last >= min_sep:
            out.append(t)
            last = t
    return np.asarray(out, dtype=np.int64)


def greedy_pairs(times, gate):
    """Pair sorted arrival times greedily in arrival order.

    Walking left to right, an unpaired photon pairs with its successor iff
    they are at most `gate` apart. Returns (partner, n_multi) where
    partner[i] is the pair index (or -1) and n_multi counts clusters of
    three or more mutually gate-linked arrivals (resolved pairwise).
    """
    n = len(times)
    partner = np.full(n, -1, dtype=np.int64)
    if n < 2:
        return partner, 0
    linked = np.diff(times) <= gate
    starts = np.empty(n, dtype=bool)
    starts[0] = True
    starts[1:] = ~linked
    cluster_id = np.cumsum(starts) - 1
    first = np.flatnonzero(starts)
    local = np.arange(n) - first[cluster_id]
    sizes = np.bincount(cluster_id)
    in_cluster = sizes[cluster_id]
    left = np.flatnonzero((local % 2 == 0) & (local + 1 < in_cluster))
    partner[left] = left + 1
    partner[left + 1] = left
    return partner, int(np.count_nonzero(sizes >= 3))
