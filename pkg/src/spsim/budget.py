"""Efficiency accounting.

Converts detector countrates into end-to-end and at-source efficiencies
through an ordered chain of named loss stages, forward-predicts countrates,
and models lateral fiber-misalignment with a Gaussian mode-overlap
approximation. Uncertainty propagation is first-order relative quadrature;
a Monte Carlo mode is available for verification.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class LossStage:
    name: str
    efficiency: float
    abs_uncertainty: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.efficiency <= 1.0):
            raise ConfigError(
                f"stage {self.name!r}: efficiency must be in (0,1], got {self.efficiency}"
            )
        if self.abs_uncertainty < 0:
            raise ConfigError(f"stage {self.name!r}: uncertainty must be >= 0")


@dataclass(frozen=True)
class EfficiencyChain:
    stages: tuple = ()

    @classmethod
    def from_pairs(cls, pairs):
        """Build from  [(name, efficiency, uncertainty), ...]."""
        return cls(tuple(LossStage(*p) for p in pairs))

    @property
    def product(self):
        return math.prod(s.efficiency for s in self.stages)

    @property
    def relative_variance(self):
        return sum((s.abs_uncertainty / s.efficiency) ** 2 for s in self.stages)

    def __iter__(self):
        return iter(self.stages)

    def __len__(self):
        return len(self.stages)


@dataclass(frozen=True)
class CountrateObservation:
    rate: float               # clicks/s
    rate_uncertainty: float
    rep_rate: float           # Hz
    label: str = ""

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigError(f"{self.label}: rate must be >= 0")
        if self.rep_rate <= 0:
            raise ConfigError(f"{self.label}: rep_rate must be > 0")


@dataclass(frozen=True)
class GaussianMode:
    waist: float        # 1/e^2 field radius, um
    wavelength: float = 940.0  # nm

    def __post_init__(self):
        if self.waist <= 0:
            raise ConfigError(f"mode waist must be > 0, got {self.waist}")


def overall_efficiency(obs):
    """End-to-end efficiency at the detectors: clicks per excitation pulse,
    R/f, with the countrate uncertainty propagated."""
    if obs.rate > obs.rep_rate:
        raise DataError(
            f"{obs.label}: rate {obs.rate} cps exceeds one click per pulse at "
            f"{obs.rep_rate} Hz"
        )
    eta = obs.rate / obs.rep_rate
    return eta, obs.rate_uncertainty / obs.rep_rate


def infer_source_efficiency(eta_overall, err_overall, chain):
    """Source efficiency before the loss chain: eta_overall / prod(stages).

    Relative errors combine in quadrature. A result above 1 is flagged as an
    inconsistent chain (returned, not raised; the caller decides).
    Returns (eta_src, err, consistent).
    """
    prod = chain.product
    if prod <= 0:
        raise ConfigError("loss chain product must be > 0")
    eta_src = eta_overall / prod
    rel = 0.0 if eta_overall == 0 else (err_overall / eta_overall) ** 2
    err = eta_src * math.sqrt(rel + chain.relative_variance)
    return eta_src, err, eta_src <= 1.0


def forward_countrate(eta_src, chain, rep_rate):
    """Expected detector countrate eta_src * prod(stages) * f; exact inverse
    of infer_source_efficiency."""
    if not (0.0 <= eta_src):
        raise ConfigError(f"eta_src must be >= 0, got {eta_src}")
    return eta_src * chain.product * rep_rate


def monte_carlo_source_efficiency(obs, chain, n=100_000, seed=0):
    """Verification mode: propagate the countrate and stage uncertainties by
    sampling instead of quadrature. Returns (mean, std)."""
    rng = np.random.default_rng(seed)
    rate = rng.normal(obs.rate, obs.rate_uncertainty, n)
    prod = np.ones(n)
    for s in chain:
        prod *= rng.normal(s.efficiency, s.abs_uncertainty, n)
    eta = rate / obs.rep_rate / prod
    return float(eta.mean()), float(eta.std())


def lateral_coupling(mode_cavity, mode_fiber, offset_um):
    """Relative coupling efficiency for a lateral offset of two Gaussian
    modes: exp(-2 d^2 / (w1^2 + w2^2)), normalized to 1 at zero offset.
    Radially symmetric: offset may be a scalar radius or an (dx, dy) pair.
    """
    if np.ndim(offset_um) == 1:
        d2 = float(offset_um[0]) ** 2 + float(offset_um[1]) ** 2
    else:
        if offset_um < 0:
            raise ConfigError(f"offset must be >= 0, got {offset_um}")
        d2 = float(offset_um) ** 2
    w1, w2 = mode_cavity.waist, mode_fiber.waist
    return math.exp(-2.0 * d2 / (w1**2 + w2**2))


def marcuse_waist(core_radius_um, numerical_aperture, wavelength_nm):
    """Fundamental-mode field radius of a step-index fiber from the Marcuse
    approximation w/a = 0.65 + 1.619 V^-1.5 + 2.879 V^-6."""
    if core_radius_um <= 0 or numerical_aperture <= 0 or wavelength_nm <= 0:
        raise ConfigError("fiber parameters must be > 0")
    v = 2.0 * math.pi * core_radius_um * numerical_aperture / (wavelength_nm * 1e-3)
    return core_radius_um * (0.65 + 1.619 / v**1.5 + 2.879 / v**6)


def default_fiber_mode(wavelength_nm=940.0):
    """UHNA-class pigtail fiber mode (core radius 0.9 um, NA 0.35)."""
    return GaussianMode(
        waist=marcuse_waist(0.9, 0.35, wavelength_nm), wavelength=wavelength_nm
    )


@dataclass(frozen=True)
class BudgetReport:
    label: str
    eta_overall: float
    eta_overall_err: float
    eta_source: float
    eta_source_err: float
    consistent: bool
    method: str = "quadrature"
    stages: tuple = field(default_factory=tuple)

    def as_dict(self):
        return {
            "label": self.label,
            "eta_overall": self.eta_overall,
            "eta_overall_err": self.eta_overall_err,
            "eta_source": self.eta_source,
            "eta_source_err": self.eta_source_err,
            "consistent": self.consistent,
            "method": self.method,
            "stages": [
                {"name": s.name, "efficiency": s.efficiency,
                 "abs_uncertainty": s.abs_uncertainty}
                for s in self.stages
            ],
        }


def budget_report(obs, chain, method="quadrature", seed=0):
    """Full per-observation budget row."""
    eta, err = overall_efficiency(obs)
    if method == "quadrature":
        eta_src, src_err, ok = infer_source_efficiency(eta, err, chain)
    elif method == "monte-carlo":
        eta_src, src_err = monte_carlo_source_efficiency(obs, chain, seed=seed)
        ok = eta_src <= 1.0
    else:
        raise ConfigError(f"unknown propagation method {method!r}")
    return BudgetReport(
        label=obs.label, eta_overall=eta, eta_overall_err=err,
        eta_source=eta_src, eta_source_err=src_err, consistent=ok,
        method=method, stages=tuple(chain),
    )
