"""Time-tag cross-correlation and peak-window observables.

`cross_correlate` builds coincidence histograms with a sliding-window
two-pointer sweep (O(N_a*m + N_b) for m mean matches per tag) instead of the
naive all-pairs product; `g2_zero` and `hom_visibility` integrate the pulsed
peak pattern of those histograms. Statistical errors are pure Poisson.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class TimeTagStream:
    """Sorted detector click record of one channel, integer picoseconds."""

    channel: int
    tags: np.ndarray
    duration: int

    def __post_init__(self):
        tags = np.ascontiguousarray(self.tags, dtype=np.int64)
        object.__setattr__(self, "tags", tags)
        if len(tags) > 1 and np.any(np.diff(tags) <= 0):
            raise DataError(f"channel {self.channel}: tags not strictly sorted")
        if len(tags) and self.duration < int(tags[-1]):
            raise DataError(
                f"channel {self.channel}: duration {self.duration} < last tag"
            )

    def __len__(self):
        return len(self.tags)

    @property
    def rate_hz(self):
        if self.duration <= 0:
            return 0.0
        return len(self.tags) / (self.duration * 1e-12)


@dataclass(frozen=True)
class CorrelationHistogram:
    bin_width: int
    tau_min: int
    tau_max: int
    counts: np.ndarray
    n_a: int
    n_b: int
    duration: int

    def __post_init__(self):
        object.__setattr__(
            self, "counts", np.ascontiguousarray(self.counts, dtype=np.int64)
        )
        if (self.tau_max - self.tau_min) != self.bin_width * len(self.counts):
            raise ConfigError("histogram span must equal bin_width * len(counts)")

    @property
    def bin_centers(self):
        k = np.arange(len(self.counts))
        return self.tau_min + self.bin_width * k + self.bin_width / 2.0

    def rebin(self, factor):
        """Merge `factor` adjacent bins; total counts are conserved."""
        if factor < 1 or len(self.counts) % factor:
            raise ConfigError(f"rebin factor {factor} does not divide bin count")
        merged = self.counts.reshape(-1, factor).sum(axis=1)
        return CorrelationHistogram(
            bin_width=self.bin_width * factor,
            tau_min=self.tau_min,
            tau_max=self.tau_max,
            counts=merged,
            n_a=self.n_a,
            n_b=self.n_b,
            duration=self.duration,
        )


@dataclass(frozen=True)
class G2Result:
    g2_zero: float
    stat_error: float
    window: int
    center_counts: int
    side_mean: float
    side_peaks_used: tuple
    clamped: bool = False


@dataclass(frozen=True)
class VisibilityResult:
    visibility: float
    stat_error: float
    area_center_co: int
    area_center_cross: int
    norm_co: float
    norm_cross: float


@dataclass(frozen=True)
class CorrectedVisibility:
    value: float
    clamped: bool


def _as_tags(stream):
    if isinstance(stream, TimeTagStream):
        return stream.tags
    return np.ascontiguousarray(stream, dtype=np.int64)


def cross_correlate(a, b, bin_width, tau_range, threads=1):
    """Coincidence histogram of delays b[j] - a[i].

    counts[k] counts pairs with delay in [tau_min + k*w, tau_min + (k+1)*w).
    tau_range is either a symmetric half-span (-tau_range, +tau_range) or an
    explicit (tau_min, tau_max) pair; bin_width must divide the span.
    With threads > 1 stream `a` is split into contiguous chunks correlated
    against all of `b`; the summed result is bit-identical to the serial
    sweep.
    """
    ta, tb = _as_tags(a), _as_tags(b)
    for name, t in (("a", ta), ("b", tb)):
        if len(t) > 1 and np.any(np.diff(t) < 0):
            raise DataError(f"stream {name} is not sorted")
    if np.isscalar(tau_range):
        tau_min, tau_max = -int(tau_range), int(tau_range)
    else:
        tau_min, tau_max = (int(v) for v in tau_range)
    bin_width = int(bin_width)
    if bin_width <= 0:
        raise ConfigError(f"bin_width must be > 0, got {bin_width}")
    if tau_max <= tau_min or (tau_max - tau_min) % bin_width:
        raise ConfigError(
            f"bin_width {bin_width} must divide the span ({tau_min}, {tau_max})"
        )

    if threads > 1 and len(ta) >= 4 * threads:
        chunks = np.array_split(ta, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(
                    lambda c: _kernels.coincidence_histogram(
                        c, tb, tau_min, tau_max, bin_width
                    ),
                    chunks,
                )
            )
        counts = np.sum(parts, axis=0)
    else:
        counts = _kernels.coincidence_histogram(ta, tb, tau_min, tau_max, bin_width)

    dur_a = a.duration if isinstance(a, TimeTagStream) else (int(ta[-1]) if len(ta) else 0)
    dur_b = b.duration if isinstance(b, TimeTagStream) else (int(tb[-1]) if len(tb) else 0)
    return CorrelationHistogram(
        bin_width=bin_width,
        tau_min=tau_min,
        tau_max=tau_max,
        counts=counts,
        n_a=len(ta),
        n_b=len(tb),
        duration=max(dur_a, dur_b),
    )


def _window_sum(hist, center_ps, window_ps):
    """Sum of the n_w = round(window/bin) bins around the bin containing
    center_ps; windows are half-open so adjacent peak windows never share a
    bin."""
    w = hist.bin_width
    n_w = max(1, int(round(window_ps / w)))
    c_idx = int((int(round(center_ps)) - hist.tau_min) // w)
    start = c_idx - n_w // 2
    stop = start + n_w
    if start < 0 or stop > len(hist.counts):
        raise DataError(
            f"histogram does not cover the {window_ps} ps window at {center_ps} ps"
        )
    return int(hist.counts[start:stop].sum())


def g2_zero(hist, rep_period, window, n_side_peaks=10, exclude_nearest=False):
    """Multi-photon suppression from peak-window integration.

    g2(0) is the ratio of coincidences integrated in a `window` around tau=0
    to the mean integral over the n_side_peaks neighbouring peaks on each
    side (|k| = 1..n, or 2..n+1 when the nearest peaks are excluded, as in
    the interference-suppressed peak cluster of a HOM histogram).
    """
    if window > rep_period * (1 + 1e-9):
        raise ConfigError(f"window {window} ps exceeds the period {rep_period} ps")
    if n_side_peaks < 1:
        raise ConfigError("n_side_peaks must be >= 1")
    c0 = _window_sum(hist, 0, window)
    first = 2 if exclude_nearest else 1
    ks = [k for k in range(first, first + n_side_peaks)]
    sides = []
    for k in ks:
        sides.append(_window_sum(hist, k * rep_period, window))
        sides.append(_window_sum(hist, -k * rep_period, window))
    side_sum = sum(sides)
    if side_sum == 0:
        raise DataError("all side peaks are empty; g2(0) undefined")
    side_mean = side_sum / len(sides)
    g2 = c0 / side_mean
    if c0 > 0:
        err = g2 * np.sqrt(1.0 / c0 + 1.0 / side_sum)
    else:
        err = 1.0 / side_mean  # one-count scale upper bound
    return G2Result(
        g2_zero=g2,
        stat_error=float(err),
        window=int(window),
        center_counts=c0,
        side_mean=side_mean,
        side_peaks_used=tuple(ks),
    )


def hom_visibility(co, cross, rep_period, window, n_norm_peaks=8):
    """Two-photon interference visibility from co/cross-polarized histograms.

    V = 1 - A_co(0)/A_cross(0) after normalizing each histogram by its mean
    side-peak area at |k| >= 2 periods (the pulsed-HOM center cluster spans
    the nearest peaks, which are therefore never used for normalization).
    """
    if co.bin_width != cross.bin_width:
        raise ConfigError("co and cross histograms must share the binning")
    a_co = _window_sum(co, 0, window)
    a_cross = _window_sum(cross, 0, window)
    norm_counts = []
    for hist, acc in ((co, []), (cross, [])):
        for k in range(2, 2 + n_norm_peaks):
            acc.append(_window_sum(hist, k * rep_period, window))
            acc.append(_window_sum(hist, -k * rep_period, window))
        norm_counts.append(acc)
    sum_co, sum_cross = (sum(c) for c in norm_counts)
    if sum_co == 0 or sum_cross == 0 or a_cross == 0:
        raise DataError("cross-polarized areas are empty; visibility undefined")
    norm_co = sum_co / len(norm_counts[0])
    norm_cross = sum_cross / len(norm_counts[1])
    ratio = (a_co / norm_co) / (a_cross / norm_cross)
    v = 1.0 - ratio
    rel = np.sqrt(
        (1.0 / a_co if a_co else 1.0)
        + 1.0 / a_cross
        + 1.0 / sum_co
        + 1.0 / sum_cross
    )
    return VisibilityResult(
        visibility=float(v),
        stat_error=float(ratio * rel),
        area_center_co=a_co,
        area_center_cross=a_cross,
        norm_co=norm_co,
        norm_cross=norm_cross,
    )


def correct_visibility(v, g2z):
    """Multi-photon-corrected visibility (1 + 2*g2(0)) * V, clamped at 1."""
    if not (-1.0 <= v <= 1.0):
        raise ConfigError(f"visibility {v} outside [-1, 1]")
    if g2z < 0:
        raise ConfigError(f"g2(0) must be >= 0, got {g2z}")
    value = (1.0 + 2.0 * g2z) * v
    if value > 1.0:
        return CorrectedVisibility(value=1.0, clamped=True)
    return CorrectedVisibility(value=value, clamped=False)


def phase_histogram(tags, period_fraction, bin_width):
    """Counts of tag time modulo the (exactly rational) pulse period.

    Returns (bin_centers_ps, counts). Exact integer arithmetic: the phase of
    tag t is (t*den mod num)/den with period num/den ps.
    """
    tags = _as_tags(tags)
    num = period_fraction.numerator
    den = period_fraction.denominator
    n_bins = -((-num) // (bin_width * den))  # ceil(period / bin_width)
    if len(tags) == 0:
        return (np.arange(n_bins) + 0.5) * bin_width, np.zeros(n_bins, np.int64)
    rem = (tags * den) % num  # overflow-free for tags below 2**63/den ps
    idx = np.minimum(rem // (bin_width * den), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    centers = (np.arange(n_bins) + 0.5) * bin_width
    return centers, counts
