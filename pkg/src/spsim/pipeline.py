"""Run orchestration: simulate -> tag files + manifest, tag files -> reports.

Every run is identified by a hash over (resolved config, seed, code
version). Tag files embed that hash and `analyze` refuses inputs whose hash
does not match the run manifest, unless explicitly overridden.
"""

import dataclasses
import json
from fractions import Fraction
from pathlib import Path

from . import _kernels, formats
from ._version import __version__
from .bench import hbt_split, hom_bench
from .config import AnalysisConfig
from .correlator import (
    correct_visibility,
    cross_correlate,
    g2_zero,
    hom_visibility,
    phase_histogram,
)
from .emitter import generate_stream
from .errors import ConfigError, DataError


def run_hash_of(config):
    return formats.canonical_hash(
        {"config": config.to_dict(), "seed": config.excitation.seed,
         "version": __version__}
    )


def simulate(config, out_dir, tag_format="binary", save_emission=False):
    """Generate the emission stream, run the configured bench and write tag
    files plus a manifest sufficient to reproduce the run bit-identically.

    Returns the manifest dict.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_hash = run_hash_of(config)
    stream = generate_stream(config.emitter, config.excitation)
    emitter_eff = config.emitter.at_power(config.excitation.power_ratio)

    ext = "csv" if tag_format == "csv" else "qtt1"
    writer = formats.write_tags_csv if tag_format == "csv" else formats.write_tags
    files = {}
    diagnostics = dict(stream.diagnostics)
    diagnostics["n_events"] = len(stream)

    if config.bench_kind == "hbt":
        a, b = hbt_split(stream, config.detector_a, config.detector_b)
        name = f"tags_hbt.{ext}"
        writer(out / name, [a, b], run_hash=run_hash)
        files[name] = {"role": "hbt"}
        diagnostics["singles"] = {"a": len(a), "b": len(b)}
    else:
        for role, copol in (("co", True), ("cross", False)):
            hom_cfg = dataclasses.replace(config.hom, copolarized=copol)
            a, b, diag = hom_bench(
                stream, hom_cfg, emitter_eff, config.detector_a, config.detector_b
            )
            name = f"tags_hom_{role}.{ext}"
            writer(out / name, [a, b], run_hash=run_hash)
            files[name] = {"role": f"hom-{role}"}
            diagnostics[f"hom_{role}"] = {
                "n_interfering_pairs": diag.n_interfering_pairs,
                "n_bunched": diag.n_bunched,
                "n_multi_clusters": diag.n_multi_clusters,
                "mean_overlap": diag.mean_overlap,
            }

    if save_emission:
        name = f"emission.{'csv' if tag_format == 'csv' else 'qlt1'}"
        em_writer = (
            formats.write_emission_csv if tag_format == "csv" else formats.write_emission
        )
        em_writer(out / name, stream, run_hash=run_hash)
        files[name] = {"role": "emission"}

    for name in files:
        files[name]["sha256"] = formats.file_sha256(out / name)

    manifest = {
        "format": "spsim-run-manifest",
        "version": __version__,
        "run_hash": run_hash,
        "seed": config.excitation.seed,
        "config": config.to_dict(),
        "files": files,
        "diagnostics": diagnostics,
        "kernel_backend": _kernels.BACKEND,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def load_manifest(run_dir):
    path = Path(run_dir) / "manifest.json"
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"no run manifest at {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt run manifest at {path}: {exc}") from exc


def _check_hash(meta, manifest, path, allow_mismatch):
    got = meta.get("run_hash", "")
    want = manifest["run_hash"]
    if got != want and not allow_mismatch:
        raise DataError(
            f"{path}: embedded run hash {got[:12]!r} does not match the manifest "
            f"{want[:12]!r} (use --allow-mismatch to analyze anyway)"
        )


def _analysis_range(window_ps, period_ps, bin_width, max_k):
    """Symmetric tau range covering max_k peaks plus one window of margin,
    aligned to whole bins."""
    half = (max_k + 1.0) * period_ps + window_ps
    half_bins = -(-int(half) // bin_width)
    return half_bins * bin_width


def analyze(run_dir, analysis=None, threads=1, allow_mismatch=False, out_dir=None):
    """Analyze a simulated run directory into a machine-readable report.

    HBT runs produce g2(0); HOM runs produce the raw and multi-photon
    corrected visibilities. Histograms (coincidence and pulse-phase) are
    written as CSV next to the report.
    """
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir else run_dir
    out.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(run_dir)
    cfg_raw = manifest["config"]
    if analysis is None:
        analysis = AnalysisConfig(**cfg_raw.get("analysis", {}))
    excitation = cfg_raw["excitation"]
    period = Fraction(10**12, int(excitation["rep_rate"]))
    period_ps = float(period)
    window = analysis.window_ps if analysis.window_ps is not None else int(period_ps)
    bin_width = analysis.bin_width_ps

    bench_kind = cfg_raw["bench"]["kind"]
    report = {
        "run_hash": manifest["run_hash"],
        "bench": bench_kind,
        "window_ps": window,
        "bin_width_ps": bin_width,
        "rep_period_ps": period_ps,
        "kernel_backend": _kernels.BACKEND,
        "files": {},
    }

    def read_run_tags(name):
        path = run_dir / name
        if not path.exists():
            raise DataError(f"run is missing tag file {name}")
        channels, meta = formats.read_tags(path)
        _check_hash(meta, manifest, path, allow_mismatch)
        if 0 not in channels or 1 not in channels:
            raise DataError(f"{path}: need tags on channels 0 and 1")
        return channels

    def tag_name(role):
        for name, info in manifest["files"].items():
            if info.get("role") == role:
                return name
        raise DataError(f"manifest lists no {role!r} tag file")

    if bench_kind == "hbt":
        channels = read_run_tags(tag_name("hbt"))
        a, b = channels[0], channels[1]
        tau = _analysis_range(window, period_ps, bin_width, analysis.n_side_peaks)
        hist = cross_correlate(a, b, bin_width, tau, threads=threads)
        res = g2_zero(hist, period_ps, window, analysis.n_side_peaks)
        formats.write_histogram_csv(out / "g2_histogram.csv", hist)
        report["files"]["g2_histogram.csv"] = "coincidence histogram"
        centers, counts = phase_histogram(a.tags, period, bin_width)
        formats.write_curve_csv(out / "decay_a.csv", "t_ps", centers, "counts", counts)
        report["files"]["decay_a.csv"] = "pulse-phase histogram, channel A"
        report.update(
            {
                "g2_zero": res.g2_zero,
                "stat_error": res.stat_error,
                "side_peaks_used": list(res.side_peaks_used),
                "center_counts": res.center_counts,
                "side_mean": res.side_mean,
                "singles": {"a": len(a), "b": len(b)},
            }
        )
    elif bench_kind == "hom":
        hists = {}
        for role in ("co", "cross"):
            channels = read_run_tags(tag_name(f"hom-{role}"))
            a, b = channels[0], channels[1]
            tau = _analysis_range(window, period_ps, bin_width,
                                  2 + analysis.n_norm_peaks)
            hists[role] = cross_correlate(a, b, bin_width, tau, threads=threads)
            formats.write_histogram_csv(out / f"hom_{role}_histogram.csv", hists[role])
            report["files"][f"hom_{role}_histogram.csv"] = f"{role}-polarized histogram"
        vis = hom_visibility(
            hists["co"], hists["cross"], period_ps, window, analysis.n_norm_peaks
        )
        corr = correct_visibility(
            max(-1.0, min(1.0, vis.visibility)), analysis.g2_for_correction
        )
        report.update(
            {
                "v_hom": vis.visibility,
                "stat_error": vis.stat_error,
                "v_corr": corr.value,
                "v_corr_clamped": corr.clamped,
                "g2_for_correction": analysis.g2_for_correction,
                "area_center_co": vis.area_center_co,
                "area_center_cross": vis.area_center_cross,
            }
        )
    else:
        raise ConfigError(f"manifest has unknown bench kind {bench_kind!r}")

    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return report
