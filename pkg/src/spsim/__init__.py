"""spsim: a desk-scale digital twin of a pulsed single-photon source.

Simulates photon-emission streams of a cavity-enhanced two-level emitter
through HBT and HOM optical benches at configurable clock rates, and
provides the analysis pipeline (coincidence correlation, g2(0) and
visibility extraction, lifetime and resonance fitting, efficiency budgets).
"""

from ._kernels import BACKEND as kernel_backend
from ._version import __version__
from .bench import DetectorParams, HomConfig, hbt_split, hom_bench
from .budget import (
    CountrateObservation,
    EfficiencyChain,
    GaussianMode,
    budget_report,
    default_fiber_mode,
    forward_countrate,
    infer_source_efficiency,
    lateral_coupling,
    marcuse_waist,
    overall_efficiency,
)
from .correlator import (
    CorrelationHistogram,
    G2Result,
    TimeTagStream,
    correct_visibility,
    cross_correlate,
    g2_zero,
    hom_visibility,
    phase_histogram,
)
from .emitter import (
    EmissionEvent,
    EmissionStream,
    EmitterParams,
    ExcitationConfig,
    generate_stream,
    occupation_probability,
    pair_overlap,
    sample_decay_time,
    step_spectral_diffusion,
)
from .errors import ConfigError, ConvergenceError, DataError, SpsimError
from .fitting import (
    DecayFitResult,
    FanoFitResult,
    Spectrum,
    fit_decay,
    fit_fano,
    purcell_factor,
    q_factor,
)

__all__ = [
    "BACKEND",
    "ConfigError",
    "ConvergenceError",
    "CorrelationHistogram",
    "CountrateObservation",
    "DataError",
    "DecayFitResult",
    "DetectorParams",
    "EfficiencyChain",
    "EmissionEvent",
    "EmissionStream",
    "EmitterParams",
    "ExcitationConfig",
    "FanoFitResult",
    "G2Result",
    "GaussianMode",
    "HomConfig",
    "Spectrum",
    "SpsimError",
    "TimeTagStream",
    "budget_report",
    "correct_visibility",
    "cross_correlate",
    "default_fiber_mode",
    "fit_decay",
    "fit_fano",
    "forward_countrate",
    "g2_zero",
    "generate_stream",
    "hbt_split",
    "hom_bench",
    "hom_visibility",
    "infer_source_efficiency",
    "kernel_backend",
    "lateral_coupling",
    "marcuse_waist",
    "occupation_probability",
    "overall_efficiency",
    "pair_overlap",
    "phase_histogram",
    "purcell_factor",
    "q_factor",
    "sample_decay_time",
    "step_spectral_diffusion",
    "__version__",
]
