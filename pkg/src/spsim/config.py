"""Declarative experiment configuration.

One YAML file describes a full run: emitter, excitation clock, bench,
detectors and analysis settings. The calibrated scenarios ship as named
presets (paper-80mhz, paper-ghz, paper-hom-2ns, paper-hom-12ns).
"""

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .bench import DetectorParams, HomConfig
from .emitter import EmitterParams, ExcitationConfig
from .errors import ConfigError

PRESET_NAMES = ("paper-80mhz", "paper-ghz", "paper-hom-2ns", "paper-hom-12ns")


@dataclass(frozen=True)
class AnalysisConfig:
    bin_width_ps: int = 4
    window_ps: int | None = None     # default: one full repetition period
    n_side_peaks: int = 10
    n_norm_peaks: int = 8
    g2_for_correction: float = 0.025  # calibration input for V_corr
    fit_t_start_ps: float = 0.0

    def __post_init__(self):
        if self.bin_width_ps < 1:
            raise ConfigError(f"analysis.bin_width_ps must be >= 1, got {self.bin_width_ps}")
        if self.n_side_peaks < 1:
            raise ConfigError("analysis.n_side_peaks must be >= 1")
        if self.window_ps is not None and self.window_ps < self.bin_width_ps:
            raise ConfigError("analysis.window_ps must cover at least one bin")
        if self.g2_for_correction < 0:
            raise ConfigError("analysis.g2_for_correction must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    emitter: EmitterParams
    excitation: ExcitationConfig
    bench_kind: str              # "hbt" | "hom"
    hom: HomConfig | None
    detector_a: DetectorParams
    detector_b: DetectorParams
    analysis: AnalysisConfig

    def __post_init__(self):
        if self.bench_kind not in ("hbt", "hom"):
            raise ConfigError(f"bench.kind must be 'hbt' or 'hom', got {self.bench_kind!r}")
        if self.bench_kind == "hom" and self.hom is None:
            raise ConfigError("bench.kind 'hom' requires a bench.hom section")
        period = self.excitation.period_ps
        window = self.analysis.window_ps
        if window is not None and window > period * (1 + 1e-9):
            raise ConfigError(
                f"analysis.window_ps {window} exceeds the repetition period {period} ps"
            )
        if self.excitation.n_pulses >= 2**32:
            raise ConfigError("excitation.n_pulses exceeds the u32 record range")

    @property
    def window_ps(self):
        if self.analysis.window_ps is not None:
            return self.analysis.window_ps
        return int(self.excitation.period_ps)

    def with_seed(self, seed):
        return dataclasses.replace(
            self, excitation=dataclasses.replace(self.excitation, seed=int(seed))
        )

    def to_dict(self):
        d = {
            "name": self.name,
            "emitter": dataclasses.asdict(self.emitter),
            "excitation": dataclasses.asdict(self.excitation),
            "bench": {"kind": self.bench_kind},
            "detectors": {
                "a": dataclasses.asdict(self.detector_a),
                "b": dataclasses.asdict(self.detector_b),
            },
            "analysis": dataclasses.asdict(self.analysis),
        }
        if self.hom is not None:
            d["bench"]["hom"] = dataclasses.asdict(self.hom)
        return d


def _build(cls, section, data):
    if not isinstance(data, dict):
        raise ConfigError(f"config section {section!r} must be a mapping")
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in section {section!r}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"section {section!r}: {exc}") from exc


def config_from_dict(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    for key in ("emitter", "excitation", "bench", "detectors"):
        if key not in raw:
            raise ConfigError(f"config is missing the {key!r} section")
    bench = raw["bench"]
    if not isinstance(bench, dict) or "kind" not in bench:
        raise ConfigError("bench section must define 'kind'")
    hom = None
    if "hom" in bench and bench["hom"] is not None:
        hom = _build(HomConfig, "bench.hom", bench["hom"])
    dets = raw["detectors"]
    if not isinstance(dets, dict) or "a" not in dets or "b" not in dets:
        raise ConfigError("detectors section must define 'a' and 'b'")
    return ExperimentConfig(
        name=str(raw.get("name", "unnamed")),
        emitter=_build(EmitterParams, "emitter", raw["emitter"]),
        excitation=_build(ExcitationConfig, "excitation", raw["excitation"]),
        bench_kind=str(bench["kind"]),
        hom=hom,
        detector_a=_build(DetectorParams, "detectors.a", dets["a"]),
        detector_b=_build(DetectorParams, "detectors.b", dets["b"]),
        analysis=_build(AnalysisConfig, "analysis", raw.get("analysis", {}) or {}),
    )


def load_config(path):
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return config_from_dict(raw)


def load_preset(name):
    if name not in PRESET_NAMES:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        )
    ref = resources.files("spsim.presets").joinpath(f"{name}.yaml")
    with resources.as_file(ref) as path:
        return load_config(path)


def resolve_raw(config_path=None, preset=None):
    """The YAML mapping for a config path or preset name (pre-validation;
    used by sweeps to apply overrides before building)."""
    if (config_path is None) == (preset is None):
        raise ConfigError("exactly one of --config or --preset is required")
    if preset is not None:
        if preset not in PRESET_NAMES:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {', '.join(PRESET_NAMES)}"
            )
        ref = resources.files("spsim.presets").joinpath(f"{preset}.yaml")
        raw = yaml.safe_load(ref.read_text())
    else:
        try:
            with open(config_path) as fh:
                raw = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {config_path} is not valid YAML: {exc}") from exc
    return raw


def resolve_config(config_path=None, preset=None):
    if (config_path is None) == (preset is None):
        raise ConfigError("exactly one of --config or --preset is required")
    if preset is not None:
        return load_preset(preset)
    return load_config(Path(config_path))


def set_by_path(raw, dotted, value):
    """Override a nested config key via 'section.key' notation (sweeps)."""
    parts = dotted.split(".")
    node = raw
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"config path {dotted!r} not found at {p!r}")
        node = node[p]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"config path {dotted!r} not found at {parts[-1]!r}")
    node[parts[-1]] = value
