"""Stochastic photon-emission model of a pulsed, cavity-enhanced two-level
emitter.

The emitter is described by a bi-exponential radiative decay (fast dominant
component plus an optional slow tail), pure dephasing, an Ornstein-Uhlenbeck
spectral-diffusion process for the slow wandering of the center frequency,
and a per-pulse two-photon emission probability. Excitation is a pulsed
clock; pulse energies enter through a saturation law for the occupation
probability.

All event times are integer picoseconds. Streams are fully reproducible
from the configured seed.
"""

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError

PS_PER_SECOND = 10**12

# fixed spawn order of the per-purpose RNG substreams of one run
RNG_EMISSION = 0
RNG_DETUNING = 1
RNG_ARMS = 2
RNG_BUNCH = 3
RNG_BUNCH_PORT = 4
RNG_PORT = 5
RNG_DET_A = 6
RNG_DET_B = 7
RNG_DARK_A = 8
RNG_DARK_B = 9
N_SUBSTREAMS = 10


def rng_substreams(seed):
    """All randomness of one run flows from one seed through a fixed
    counter-based split (Philox), so internal parallelism cannot reorder
    draws."""
    children = np.random.SeedSequence(seed).spawn(N_SUBSTREAMS)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


@dataclass(frozen=True)
class EmitterParams:
    """Radiative, dephasing and spectral-diffusion parameters.

    t1_fast/t1_slow are decay constants in ps, dephasing_rate and sd_sigma
    are angular frequencies in rad/ps, sd_tau_c is the spectral-diffusion
    correlation time in ns. p_multi is the probability that an emitting
    pulse yields a second photon. dephasing_power_coeff adds
    coeff * (P/P_sat) of excitation-induced dephasing (rad/ps).
    """

    t1_fast: float = 77.0
    t1_slow: float = 650.0
    slow_fraction: float = 0.0
    dephasing_rate: float = 0.0
    sd_sigma: float = 0.0
    sd_tau_c: float = 20.0
    p_multi: float = 0.0
    p_sat_exponent: float = 1.0
    dephasing_power_coeff: float = 0.0

    def __post_init__(self):
        if not (self.t1_fast > 0):
            raise ConfigError(f"emitter.t1_fast must be > 0, got {self.t1_fast}")
        if self.t1_slow < self.t1_fast:
            raise ConfigError(
                f"emitter.t1_slow must be >= t1_fast, got {self.t1_slow} < {self.t1_fast}"
            )
        if not (0.0 <= self.slow_fraction < 1.0):
            raise ConfigError(
                f"emitter.slow_fraction must be in [0,1), got {self.slow_fraction}"
            )
        for name in ("dephasing_rate", "sd_sigma", "sd_tau_c", "p_sat_exponent",
                     "dephasing_power_coeff"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"emitter.{name} must be finite and >= 0, got {v}")
        if not (0.0 <= self.p_multi <= 0.5):
            raise ConfigError(f"emitter.p_multi must be in [0, 0.5], got {self.p_multi}")

    def at_power(self, power_ratio):
        """Effective parameters at a given P/P_sat (excitation-power-induced
        dephasing folded into dephasing_rate)."""
        if self.dephasing_power_coeff == 0.0:
            return self
        return replace(
            self,
            dephasing_rate=self.dephasing_rate
            + self.dephasing_power_coeff * power_ratio,
            dephasing_power_coeff=0.0,
        )


@dataclass(frozen=True)
class ExcitationConfig:
    """Pulsed-excitation clock.

    rep_rate is the pulse (or doublet-frame) repetition rate in Hz and must
    divide 10^12 ps/s into an exact rational period. In doublet mode each
    frame carries two pulses doublet_spacing_ps apart; n_pulses counts
    individual pulses in either mode.
    """

    rep_rate: int = 80_000_000
    n_pulses: int = 1_000_000
    power_ratio: float = 1.0
    seed: int = 0
    doublet: bool = False
    doublet_spacing_ps: int = 2000
    wavelength_exc_nm: float = 793.0  # metadata only, no dynamical role

    def __post_init__(self):
        if self.rep_rate <= 0:
            raise ConfigError(f"excitation.rep_rate must be > 0, got {self.rep_rate}")
        if self.n_pulses < 1:
            raise ConfigError(f"excitation.n_pulses must be >= 1, got {self.n_pulses}")
        if self.power_ratio < 0:
            raise ConfigError(
                f"excitation.power_ratio must be >= 0, got {self.power_ratio}"
            )
        period = self.period_fraction
        if period.denominator > 64:
            raise ConfigError(
                f"excitation.rep_rate {self.rep_rate} Hz has no picosecond-"
                f"rational period (1/f = {float(period)} ps)"
            )
        if self.doublet:
            if not (0 < self.doublet_spacing_ps < float(period)):
                raise ConfigError(
                    "excitation.doublet_spacing_ps must lie inside one period, "
                    f"got {self.doublet_spacing_ps} vs period {float(period)} ps"
                )

    @property
    def period_fraction(self):
        return Fraction(PS_PER_SECOND, int(self.rep_rate))

    @property
    def period_ps(self):
        """Nominal repetition period in ps (may be fractional, e.g. 781.25)."""
        return float(self.period_fraction)

    def pulse_times(self):
        """Integer-ps time of every excitation pulse.

        The exact rational phase k*num/den is accumulated and each pulse
        time rounded independently (half away from zero), so there is no
        cumulative drift: t_k - k/f stays within half a picosecond.
        """
        period = self.period_fraction
        num = period.numerator
        den = period.denominator
        n = self.n_pulses
        if self.doublet:
            frame = np.arange(n, dtype=np.int64) // 2
            offs = (np.arange(n, dtype=np.int64) % 2) * self.doublet_spacing_ps
        else:
            frame = np.arange(n, dtype=np.int64)
            offs = 0
        if int(frame[-1]) * 2 * num + den >= 2**63:
            raise ConfigError(
                "excitation: n_pulses/rep_rate overflow the picosecond clock"
            )
        return (frame * (2 * num) + den) // (2 * den) + offs

    def duration_ps(self):
        n_frames = (self.n_pulses + 1) // 2 if self.doublet else self.n_pulses
        period = self.period_fraction
        return -((-n_frames * period.numerator) // period.denominator)  # ceil


@dataclass(frozen=True)
class EmissionEvent:
    pulse_index: int
    time: int
    detuning: float
    is_multi_partner: bool


@dataclass(frozen=True)
class EmissionStream:
    """Array-backed, time-sorted sequence of EmissionEvent."""

    times: np.ndarray         # int64 ps
    pulse_index: np.ndarray   # int64
    detuning: np.ndarray      # float64 rad/ps
    is_multi: np.ndarray      # bool
    duration: int             # ps
    params: EmitterParams
    config: ExcitationConfig
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i):
        return EmissionEvent(
            pulse_index=int(self.pulse_index[i]),
            time=int(self.times[i]),
            detuning=float(self.detuning[i]),
            is_multi_partner=bool(self.is_multi[i]),
        )


def occupation_probability(power_ratio, p_sat_exponent=1.0):
    """Excited-state occupation after one pulse: 1 - exp(-k * P/P_sat).

    Monotone saturating, 0 at zero power, 1 in the high-power limit.
    """
    power_ratio = np.asarray(power_ratio, dtype=float)
    if np.any(power_ratio < 0):
        raise ConfigError(f"power_ratio must be >= 0, got {power_ratio}")
    return 1.0 - np.exp(-power_ratio * p_sat_exponent)


def sample_decay_time(params, rng, size=None):
    """Draw radiative delays from the bi-exponential mixture
    (1-slow_fraction)*Exp(t1_fast) + slow_fraction*Exp(t1_slow), in ps."""
    n = 1 if size is None else size
    scale = np.where(
        rng.random(n) < params.slow_fraction, params.t1_slow, params.t1_fast
    )
    out = rng.exponential(1.0, n) * scale
    return float(out[0]) if size is None else out


def step_spectral_diffusion(detuning_prev, dt_ns, params, rng):
    """One Ornstein-Uhlenbeck step of the spectral-diffusion detuning.

    delta' = delta * exp(-dt/tau_c) + sd_sigma * sqrt(1 - exp(-2 dt/tau_c)) * N(0,1);
    the stationary distribution is N(0, sd_sigma^2).
    """
    if dt_ns < 0:
        raise ConfigError(f"dt must be >= 0, got {dt_ns}")
    if params.sd_sigma == 0.0:
        return 0.0 * detuning_prev
    if params.sd_tau_c == 0.0:
        alpha = 0.0
    else:
        alpha = np.exp(-dt_ns / params.sd_tau_c)
    noise = rng.standard_normal(np.shape(detuning_prev) or None)
    return detuning_prev * alpha + params.sd_sigma * np.sqrt(1.0 - alpha**2) * noise


def _ou_path(params, spacings_ns, rng, n):
    """Stationary OU samples at n successive pulses.

    spacings_ns is either a scalar inter-pulse spacing or a pair
    (intra-frame, inter-frame) for doublet excitation; the alternating
    recursion is folded into one AR(1) per parity so the whole path is
    computed by linear filtering.
    """
    sigma = params.sd_sigma
    if sigma == 0.0 or n == 0:
        return np.zeros(n)
    z = rng.standard_normal(n)
    tau = params.sd_tau_c

    def ar1(alpha, noise, x0):
        # x_k = alpha x_{k-1} + noise_k with x_0 given, vectorized
        seq = np.empty(len(noise) + 1)
        seq[0] = x0
        seq[1:] = noise
        return lfilter([1.0], [1.0, -alpha], seq)

    if np.isscalar(spacings_ns):
        alpha = np.exp(-spacings_ns / tau)
        q = sigma * np.sqrt(1.0 - alpha**2)
        path = ar1(alpha, q * z[1:], sigma * z[0])
        return path
    # doublet: spacing a within a frame, spacing b to the next frame
    a_ns, b_ns = spacings_ns
    alpha_a = np.exp(-a_ns / tau)
    alpha_b = np.exp(-b_ns / tau)
    q_a = sigma * np.sqrt(1.0 - alpha_a**2)
    q_b = sigma * np.sqrt(1.0 - alpha_b**2)
    n_frames = (n + 1) // 2
    z_first = z[0::2]
    z_second = z[1::2]
    # first pulse of frame m+1 from first pulse of frame m: two steps merged
    w = alpha_b * q_a * z_second[: n_frames - 1] + q_b * z_first[1:n_frames]
    first = ar1(alpha_a * alpha_b, w, sigma * z_first[0])
    second = alpha_a * first[: len(z_second)] + q_a * z_second
    path = np.empty(n)
    path[0::2] = first
    path[1::2] = second[: n - n_frames]
    return path


def generate_stream(params, cfg):
    """Simulate the emission-event stream for one excitation run.

    Per pulse: with the saturation occupation probability one photon is
    emitted at pulse time + radiative delay; an emitting pulse additionally
    yields a second, independently delayed photon with probability p_multi.
    The spectral-diffusion detuning is the OU value of the emitting pulse
    (shared by both photons of a double). Output is sorted by time.
    """
    params = params.at_power(cfg.power_ratio)
    gens = rng_substreams(cfg.seed)
    g_emit = gens[RNG_EMISSION]
    g_ou = gens[RNG_DETUNING]

    n = cfg.n_pulses
    pulse_t = cfg.pulse_times()
    p_occ = float(occupation_probability(cfg.power_ratio, params.p_sat_exponent))

    emits = g_emit.random(n) < p_occ
    doubles = (g_emit.random(n) < params.p_multi) & emits

    period_ns = cfg.period_ps / 1000.0
    if cfg.doublet:
        spacing = (
            cfg.doublet_spacing_ps / 1000.0,
            period_ns - cfg.doublet_spacing_ps / 1000.0,
        )
    else:
        spacing = period_ns
    detuning_path = _ou_path(params, spacing, g_ou, n)

    idx1 = np.flatnonzero(emits)
    idx2 = np.flatnonzero(doubles)
    d1 = sample_decay_time(params, g_emit, size=len(idx1))
    d2 = sample_decay_time(params, g_emit, size=len(idx2))

    times = np.concatenate(
        [pulse_t[idx1] + np.floor(d1 + 0.5).astype(np.int64),
         pulse_t[idx2] + np.floor(d2 + 0.5).astype(np.int64)]
    )
    pulse_index = np.concatenate([idx1, idx2])
    detuning = detuning_path[pulse_index]
    is_multi = np.zeros(len(times), dtype=bool)
    is_multi[len(idx1):] = True

    order = np.lexsort((is_multi, pulse_index, times))
    duration = max(int(cfg.duration_ps()), int(times[order[-1]]) if len(order) else 0)
    return EmissionStream(
        times=times[order],
        pulse_index=pulse_index[order],
        detuning=detuning[order],
        is_multi=is_multi[order],
        duration=duration,
        params=params,
        config=cfg,
        diagnostics={"n_emitting_pulses": int(emits.sum()),
                     "n_double_pulses": int(doubles.sum()),
                     "p_occupation": p_occ},
    )


def pair_overlap(e1, e2, params):
    """Two-photon wavefunction overlap of a photon pair from one emitter.

    M = [G/(G+2*gamma*)] * [Gt^2/(Gt^2 + dw^2)] with G = 1/t1_fast,
    Gt = G + 2*gamma*, dw the detuning difference. M = 1 iff the emitter is
    Fourier-limited (gamma* = 0) and the detunings coincide. The
    factorization is an approximation for exponential wavepackets.
    """
    gamma = 1.0 / params.t1_fast
    gamma_t = gamma + 2.0 * params.dephasing_rate
    d1 = e1.detuning if isinstance(e1, EmissionEvent) else e1
    d2 = e2.detuning if isinstance(e2, EmissionEvent) else e2
    dw = np.asarray(d1, dtype=float) - np.asarray(d2, dtype=float)
    m = (gamma / gamma_t) * (gamma_t**2 / (gamma_t**2 + dw**2))
    return float(m) if np.ndim(m) == 0 else m
