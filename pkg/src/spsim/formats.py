"""On-disk formats.

Emission streams: magic "QLT1", little-endian records
{u64 time_ps, u32 pulse_index, f64 detuning, u8 flags} (flag bit 0 marks the
second photon of a double emission). Time-tag streams: magic "QTT1",
little-endian records {u8 channel, u64 time_ps}. Both carry a small JSON
meta block (duration, run hash) between the magic and the records, and both
have a CSV twin with the same columns and '# key=value' header lines.
"""

import hashlib
import json
import struct

import numpy as np

from .correlator import TimeTagStream
from .errors import DataError

EMISSION_MAGIC = b"QLT1"
TAG_MAGIC = b"QTT1"
_VERSION = 1

EMISSION_DTYPE = np.dtype(
    [("time", "<u8"), ("pulse", "<u4"), ("detuning", "<f8"), ("flags", "u1")]
)
TAG_DTYPE = np.dtype([("channel", "u1"), ("time", "<u8")])

FLAG_MULTI_PARTNER = 0x01


def _write_header(fh, magic, meta):
    blob = json.dumps(meta, sort_keys=True).encode()
    fh.write(magic)
    fh.write(struct.pack("<II", _VERSION, len(blob)))
    fh.write(blob)


def _read_header(fh, magic, path):
    got = fh.read(4)
    if got != magic:
        raise DataError(f"{path}: expected {magic.decode()} file, got {got!r}")
    version, meta_len = struct.unpack("<II", fh.read(8))
    if version != _VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    return json.loads(fh.read(meta_len).decode())


def write_emission(path, stream, run_hash=""):
    meta = {
        "duration_ps": int(stream.duration),
        "n_records": len(stream),
        "run_hash": run_hash,
    }
    rec = np.empty(len(stream), dtype=EMISSION_DTYPE)
    rec["time"] = stream.times
    rec["pulse"] = stream.pulse_index
    rec["detuning"] = stream.detuning
    rec["flags"] = stream.is_multi.astype(np.uint8) * FLAG_MULTI_PARTNER
    with open(path, "wb") as fh:
        _write_header(fh, EMISSION_MAGIC, meta)
        fh.write(rec.tobytes())
    return meta


def read_emission(path):
    """Returns (times, pulse_index, detuning, is_multi, meta)."""
    with open(path, "rb") as fh:
        meta = _read_header(fh, EMISSION_MAGIC, path)
        rec = np.frombuffer(fh.read(), dtype=EMISSION_DTYPE)
    return (
        rec["time"].astype(np.int64),
        rec["pulse"].astype(np.int64),
        rec["detuning"].astype(np.float64),
        (rec["flags"] & FLAG_MULTI_PARTNER).astype(bool),
        meta,
    )


def write_emission_csv(path, stream, run_hash=""):
    with open(path, "w") as fh:
        fh.write(f"# format=QLT1-csv duration_ps={int(stream.duration)} "
                 f"run_hash={run_hash}\n")
        fh.write("time_ps,pulse_index,detuning,flags\n")
        flags = stream.is_multi.astype(np.uint8) * FLAG_MULTI_PARTNER
        for t, p, d, f in zip(stream.times, stream.pulse_index,
                              stream.detuning, flags):
            fh.write(f"{t},{p},{d!r},{f}\n")


def write_tags(path, streams, run_hash=""):
    """Write one or more channels merged into a single tag file, ordered by
    time (ties by channel)."""
    duration = max((s.duration for s in streams), default=0)
    chan = np.concatenate(
        [np.full(len(s), s.channel, np.uint8) for s in streams]
    ) if streams else np.empty(0, np.uint8)
    time = np.concatenate([s.tags for s in streams]) if streams else np.empty(0, np.int64)
    order = np.lexsort((chan, time))
    meta = {
        "duration_ps": int(duration),
        "channels": sorted(int(s.channel) for s in streams),
        "n_records": int(len(time)),
        "run_hash": run_hash,
    }
    rec = np.empty(len(time), dtype=TAG_DTYPE)
    rec["channel"] = chan[order]
    rec["time"] = time[order]
    with open(path, "wb") as fh:
        _write_header(fh, TAG_MAGIC, meta)
        fh.write(rec.tobytes())
    return meta


def write_tags_csv(path, streams, run_hash=""):
    duration = max((s.duration for s in streams), default=0)
    chan = np.concatenate(
        [np.full(len(s), s.channel, np.uint8) for s in streams]
    ) if streams else np.empty(0, np.uint8)
    time = np.concatenate([s.tags for s in streams]) if streams else np.empty(0, np.int64)
    order = np.lexsort((chan, time))
    with open(path, "w") as fh:
        fh.write(f"# format=QTT1-csv duration_ps={int(duration)} run_hash={run_hash}\n")
        fh.write("channel,time_ps\n")
        for c, t in zip(chan[order], time[order]):
            fh.write(f"{c},{t}\n")


def _tags_from_records(channels, times, duration, meta):
    out = {}
    for c in sorted(set(int(c) for c in np.unique(channels))):
        t = times[channels == c]
        out[c] = TimeTagStream(channel=c, tags=np.sort(t), duration=duration)
    if not out:
        raise DataError("tag file contains no records")
    return out, meta


def read_tags(path):
    """Read a tag file (binary or CSV twin, auto-detected).

    Returns ({channel: TimeTagStream}, meta).
    """
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == TAG_MAGIC:
        with open(path, "rb") as fh:
            meta = _read_header(fh, TAG_MAGIC, path)
            rec = np.frombuffer(fh.read(), dtype=TAG_DTYPE)
        if len(rec) == 0:
            raise DataError(f"{path}: tag file is empty")
        return _tags_from_records(
            rec["channel"].astype(np.int64),
            rec["time"].astype(np.int64),
            int(meta["duration_ps"]),
            meta,
        )
    if head[:1] == b"#":
        meta = {}
        with open(path) as fh:
            first = fh.readline().strip().lstrip("#").split()
            for kv in first:
                if "=" in kv:
                    k, v = kv.split("=", 1)
                    meta[k] = v
        data = np.loadtxt(path, delimiter=",", skiprows=2, dtype=np.int64, ndmin=2)
        if data.size == 0:
            raise DataError(f"{path}: tag file is empty")
        duration = int(meta.get("duration_ps", data[:, 1].max()))
        meta["duration_ps"] = duration
        return _tags_from_records(data[:, 0], data[:, 1], duration, meta)
    raise DataError(f"{path}: not a QTT1 tag file (bad magic {head!r})")


def write_histogram_csv(path, hist):
    with open(path, "w") as fh:
        fh.write("tau_ps,counts\n")
        for tau, c in zip(hist.bin_centers, hist.counts):
            fh.write(f"{tau!r},{c}\n")


def write_curve_csv(path, x_name, x, y_name, y):
    with open(path, "w") as fh:
        fh.write(f"{x_name},{y_name}\n")
        for xi, yi in zip(x, y):
            fh.write(f"{xi!r},{yi}\n")


def read_two_column_csv(path):
    """Generic (x, y) CSV reader for histogram/spectrum inputs; skips '#'
    comments and a single header line."""
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: cannot parse CSV ({exc})") from exc
    if data.shape[0] == 0 or data.shape[1] < 2:
        raise DataError(f"{path}: expected two CSV columns")
    return data[:, 0], data[:, 1]


def canonical_hash(obj):
    """Stable hash of a JSON-serializable object (run identity)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
