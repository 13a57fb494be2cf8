"""Optical benches: HBT beamsplitter and unbalanced-MZI HOM interferometer.

Interference is modeled at the coincidence-statistics level: photons meeting
at the output splitter within the coincidence gate form pairs that bunch
with probability equal to their two-photon overlap. That reproduces exactly
the observables the analysis consumes (peak areas), without amplitude-level
field simulation.

Detector imperfections (finite efficiency, Gaussian jitter, dead time,
Poissonian dark counts) are applied identically in both benches.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .correlator import TimeTagStream
from .emitter import (
    RNG_ARMS,
    RNG_BUNCH,
    RNG_BUNCH_PORT,
    RNG_DARK_A,
    RNG_DARK_B,
    RNG_DET_A,
    RNG_DET_B,
    RNG_PORT,
    pair_overlap,
    rng_substreams,
)
from .errors import ConfigError


@dataclass(frozen=True)
class DetectorParams:
    """Single-photon detector: SNSPD-like defaults."""

    efficiency: float = 0.85
    jitter_sigma: float = 20.0   # ps
    dead_time: int = 10_000      # ps
    dark_rate: float = 0.0       # Hz

    def __post_init__(self):
        if not (0.0 <= self.efficiency <= 1.0):
            raise ConfigError(f"detector.efficiency must be in [0,1], got {self.efficiency}")
        for name in ("jitter_sigma", "dead_time", "dark_rate"):
            if getattr(self, name) < 0:
                raise ConfigError(f"detector.{name} must be >= 0")


@dataclass(frozen=True)
class HomConfig:
    """Unbalanced Mach-Zehnder for two-photon interference.

    delay is the arm imbalance in ps (matched to the emission spacing of the
    photons to interfere); coincidence_gate is the maximum arrival-time
    difference at the output splitter for a pair to interfere.
    """

    delay: int = 12_500
    copolarized: bool = True
    coincidence_gate: int = 385  # default 5 * t1_fast of the 77 ps emitter

    def __post_init__(self):
        if self.delay <= 0:
            raise ConfigError(f"hom.delay must be > 0, got {self.delay}")
        if self.coincidence_gate < 0:
            raise ConfigError("hom.coincidence_gate must be >= 0")


@dataclass(frozen=True)
class HomDiagnostics:
    n_photons: int
    n_interfering_pairs: int
    n_bunched: int
    n_multi_clusters: int
    mean_overlap: float


def _detect(times, det, duration, gen_det, gen_dark, channel):
    """Detector chain: efficiency thinning -> timing jitter -> dark counts
    -> dead-time filter. `times` must be sorted."""
    t = times[gen_det.random(len(times)) < det.efficiency]
    if det.jitter_sigma > 0 and len(t):
        t = t + np.rint(
            gen_det.standard_normal(len(t)) * det.jitter_sigma
        ).astype(np.int64)
        t = t[t >= 0]  # jitter cannot move a click before the run started
    n_dark = gen_dark.poisson(det.dark_rate * duration * 1e-12)
    if n_dark:
        t = np.concatenate([t, gen_dark.integers(0, duration, n_dark)])
    t.sort(kind="stable")
    # a 1 ps clock cannot register two clicks in the same bin, so the
    # effective minimum separation is at least one tick
    t = _kernels.min_separation_filter(
        np.ascontiguousarray(t, dtype=np.int64), max(int(det.dead_time), 1)
    )
    duration = max(duration, int(t[-1])) if len(t) else duration
    return TimeTagStream(channel=channel, tags=t, duration=duration)


def hbt_split(stream, det_a, det_b, seed=None):
    """Hanbury-Brown-Twiss bench: 50/50 split onto two detectors.

    Every photon is routed to one of the two outputs (conserving photon
    number before detector thinning), then each channel runs the detector
    chain. `seed` defaults to the stream's excitation seed.
    """
    gens = rng_substreams(stream.config.seed if seed is None else seed)
    to_a = gens[RNG_PORT].random(len(stream)) < 0.5
    a = _detect(stream.times[to_a], det_a, stream.duration,
                gens[RNG_DET_A], gens[RNG_DARK_A], channel=0)
    b = _detect(stream.times[~to_a], det_b, stream.duration,
                gens[RNG_DET_B], gens[RNG_DARK_B], channel=1)
    return a, b


def hom_bench(stream, cfg, params, det_a, det_b, seed=None):
    """Two-photon interference bench.

    Each photon takes the short or long (+delay) arm with equal probability.
    Photons reaching the output splitter within the coincidence gate form
    interfering pairs, resolved greedily in arrival order (overlapping
    triples are counted in the diagnostics). A co-polarized pair bunches
    with probability equal to its two-photon overlap, exiting a common
    random port; otherwise, and always in cross-polarized configuration,
    photons are routed independently. Photons flagged as the second emission
    of a multi-photon pulse carry no interference (overlap forced to 0).

    Returns (stream_a, stream_b, diagnostics).
    """
    gens = rng_substreams(stream.config.seed if seed is None else seed)
    n = len(stream)
    long_arm = gens[RNG_ARMS].random(n) < 0.5
    arrival = stream.times + long_arm * np.int64(cfg.delay)
    order = np.argsort(arrival, kind="stable")
    arrival = np.ascontiguousarray(arrival[order])
    detuning = stream.detuning[order]
    is_multi = stream.is_multi[order]

    partner, n_multi = _kernels.greedy_pairs(arrival, int(cfg.coincidence_gate))
    left = np.flatnonzero(partner > np.arange(n))
    right = partner[left]

    overlap = pair_overlap(detuning[left], detuning[right], params)
    overlap = np.atleast_1d(np.asarray(overlap, dtype=float))
    overlap[is_multi[left] | is_multi[right]] = 0.0

    # the bunching uniform is drawn in both polarizations so that a
    # cross-polarized run and a co-polarized run with zero overlap consume
    # identical randomness and produce identical streams
    u_bunch = gens[RNG_BUNCH].random(len(left))
    pair_port_a = gens[RNG_BUNCH_PORT].random(len(left)) < 0.5
    photon_port_a = gens[RNG_PORT].random(n) < 0.5

    bunched = u_bunch < overlap if cfg.copolarized else np.zeros(len(left), bool)
    to_a = photon_port_a
    to_a[left[bunched]] = pair_port_a[bunched]
    to_a[right[bunched]] = pair_port_a[bunched]

    duration = max(stream.duration, int(arrival[-1])) if n else stream.duration
    a = _detect(arrival[to_a], det_a, duration,
                gens[RNG_DET_A], gens[RNG_DARK_A], channel=0)
    b = _detect(arrival[~to_a], det_b, duration,
                gens[RNG_DET_B], gens[RNG_DARK_B], channel=1)
    diag = HomDiagnostics(
        n_photons=n,
        n_interfering_pairs=len(left),
        n_bunched=int(bunched.sum()),
        n_multi_clusters=int(n_multi),
        mean_overlap=float(overlap.mean()) if len(left) else 0.0,
    )
    return a, b, diag
