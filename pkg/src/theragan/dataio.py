"""On-disk formats: dataset directories, model files, and signal CSVs.

A dataset is a directory:

    manifest.json                     sensors, activities, recording index
    recordings/<rec_id>/segments.json frame-indexed simple-activity segments
    recordings/<rec_id>/<sensor>.csv  one 6-channel signal per sensor

A trained model is a directory with `model.manifest.json` (text header)
and `model.weights.bin` (named float32 arrays, little-endian, row-major,
length-prefixed names).

Channel layout is fixed everywhere: sensor-major, and within a sensor
gx, gy, gz (rad/s) then ax, ay, az (m/s^2).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SAMPLE_RATE_HZ = 100
CHANNEL_NAMES = ("gx", "gy", "gz", "ax", "ay", "az")
SENSOR_IDS = ("left_wrist", "right_wrist", "left_thigh", "right_thigh")
MANIFEST_VERSION = 1
MODEL_MAGIC = b"TGMW"
MODEL_VERSION = 1


class DataError(Exception):
    """Base class for dataset and model file problems."""


class ManifestError(DataError):
    """The manifest is missing, unparsable, or structurally invalid."""


class MissingFileError(DataError):
    """A file referenced by a manifest does not exist."""


class ShapeMismatchError(DataError):
    """Stored data disagrees with its declared shape."""


class SegmentCoverageError(DataError):
    """Segments fail to partition a recording."""


class ModelFormatError(DataError):
    """A model file is corrupt, truncated, or of the wrong version."""


# ---------------------------------------------------------------------------
# signal CSV


def export_signal_csv(signal: np.ndarray, path: str | Path) -> None:
    """Write a 6xT signal as CSV with 9 significant digits per value."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 2 or signal.shape[0] != 6:
        raise ShapeMismatchError(f"expected a (6, T) signal, got shape {signal.shape}")
    lines = ["frame," + ",".join(CHANNEL_NAMES)]
    for t in range(signal.shape[1]):
        lines.append(f"{t}," + ",".join(f"{v:.9g}" for v in signal[:, t]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_signal_csv(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"signal file not found: {path}")
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    header = "frame," + ",".join(CHANNEL_NAMES)
    if not lines or lines[0] != header:
        raise ShapeMismatchError(f"bad signal CSV header in {path}")
    values = np.empty((6, len(lines) - 1))
    for t, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != 7:
            raise ShapeMismatchError(f"{path}: row {t} has {len(parts)} fields, expected 7")
        values[:, t] = [float(v) for v in parts[1:]]
    return values


# ---------------------------------------------------------------------------
# dataset


@dataclass
class Segment:
    start: int
    end: int  # exclusive
    simple_id: str


@dataclass
class RecordingMeta:
    rec_id: str
    subject_id: str
    complex_id: str
    path: str


@dataclass
class Recording:
    rec_id: str
    subject_id: str
    complex_id: str
    signals: dict[str, np.ndarray]  # sensor id -> (6, T)
    segments: list[Segment]

    @property
    def n_frames(self) -> int:
        return next(iter(self.signals.values())).shape[1]


@dataclass
class DatasetManifest:
    sensors: list[str]
    simple_activities: dict[str, str]
    complex_activities: dict[str, list[str]]
    recordings: list[RecordingMeta]
    version: int = MANIFEST_VERSION
    sample_rate_hz: int = SAMPLE_RATE_HZ


def _require(doc: dict, key: str, typ, where: str):
    if key not in doc:
        raise ManifestError(f"{where}: missing key {key!r}")
    value = doc[key]
    if not isinstance(value, typ):
        raise ManifestError(f"{where}: key {key!r} has wrong type")
    return value


class Dataset:
    """A loaded manifest with lazy, validated recording access."""

    def __init__(self, root: str | Path, manifest: DatasetManifest):
        self.root = Path(root)
        self.manifest = manifest
        self._meta_by_id = {m.rec_id: m for m in manifest.recordings}

    def recording_ids(self) -> list[str]:
        return [m.rec_id for m in self.manifest.recordings]

    def load_recording(self, rec_id: str) -> Recording:
        if rec_id not in self._meta_by_id:
            raise ManifestError(f"unknown recording id {rec_id!r}")
        meta = self._meta_by_id[rec_id]
        rec_dir = self.root / meta.path
        seg_path = rec_dir / "segments.json"
        if not seg_path.exists():
            raise MissingFileError(f"recording {rec_id!r}: missing {seg_path}")
        try:
            seg_doc = json.loads(seg_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ManifestError(f"recording {rec_id!r}: bad segments.json: {e}") from None
        segments = [Segment(int(s["start"]), int(s["end"]), str(s["simple"]))
                    for s in seg_doc]

        signals = {}
        for sensor in self.manifest.sensors:
            signals[sensor] = import_signal_csv(rec_dir / f"{sensor}.csv")
        lengths = {sig.shape[1] for sig in signals.values()}
        if len(lengths) != 1:
            raise ShapeMismatchError(
                f"recording {rec_id!r}: sensors disagree on length: {sorted(lengths)}")
        n_frames = lengths.pop()
        _validate_segments(segments, n_frames, rec_id)
        for seg in segments:
            if seg.simple_id not in self.manifest.simple_activities:
                raise ManifestError(
                    f"recording {rec_id!r}: segment references unknown simple "
                    f"activity {seg.simple_id!r}")
        return Recording(rec_id, meta.subject_id, meta.complex_id, signals, segments)

    def iter_recordings(self):
        for rec_id in self.recording_ids():
            yield self.load_recording(rec_id)


def _validate_segments(segments: list[Segment], n_frames: int, rec_id: str) -> None:
    if not segments:
        raise SegmentCoverageError(f"recording {rec_id!r}: no segments")
    cursor = 0
    for seg in segments:
        if seg.start != cursor:
            raise SegmentCoverageError(
                f"recording {rec_id!r}: segment starting at {seg.start} leaves "
                f"frames [{cursor}, {seg.start}) uncovered or overlapped")
        if seg.end <= seg.start:
            raise SegmentCoverageError(
                f"recording {rec_id!r}: empty segment at {seg.start}")
        cursor = seg.end
    if cursor != n_frames:
        raise SegmentCoverageError(
            f"recording {rec_id!r}: segments cover [0, {cursor}) but the "
            f"recording has {n_frames} frames")


def load_dataset(path: str | Path) -> Dataset:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise MissingFileError(f"no manifest.json under {root}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest.json is not valid JSON: {e}") from None

    version = _require(doc, "version", int, "manifest")
    if version != MANIFEST_VERSION:
        raise ManifestError(f"manifest version {version} unsupported")
    rate = _require(doc, "sample_rate_hz", int, "manifest")
    if rate != SAMPLE_RATE_HZ:
        raise ManifestError(f"sample_rate_hz must be {SAMPLE_RATE_HZ}, got {rate}")
    sensors = _require(doc, "sensors", list, "manifest")
    if not sensors or len(set(sensors)) != len(sensors):
        raise ManifestError("sensors must be a non-empty list of unique ids")
    simple = _require(doc, "simple_activities", dict, "manifest")
    complex_acts = _require(doc, "complex_activities", dict, "manifest")
    for cid, parts in complex_acts.items():
        if not isinstance(parts, list) or not parts:
            raise ManifestError(f"complex activity {cid!r} must list simple ids")
        for sid in parts:
            if sid not in simple:
                raise ManifestError(
                    f"complex activity {cid!r} references unknown simple id {sid!r}")
    recs = []
    for entry in _require(doc, "recordings", list, "manifest"):
        meta = RecordingMeta(
            rec_id=str(_require(entry, "id", str, "recording entry")),
            subject_id=str(_require(entry, "subject", str, "recording entry")),
            complex_id=str(_require(entry, "complex", str, "recording entry")),
            path=str(_require(entry, "path", str, "recording entry")),
        )
        if meta.complex_id not in complex_acts:
            raise ManifestError(
                f"recording {meta.rec_id!r} references unknown complex id "
                f"{meta.complex_id!r}")
        rec_dir = root / meta.path
        if not rec_dir.exists():
            raise MissingFileError(f"recording {meta.rec_id!r}: missing {rec_dir}")
        for sensor in sensors:
            f = rec_dir / f"{sensor}.csv"
            if not f.exists():
                raise MissingFileError(f"recording {meta.rec_id!r}: missing {f}")
        if not (rec_dir / "segments.json").exists():
            raise MissingFileError(
                f"recording {meta.rec_id!r}: missing {rec_dir / 'segments.json'}")
        recs.append(meta)
    manifest = DatasetManifest(
        sensors=[str(s) for s in sensors],
        simple_activities={str(k): str(v) for k, v in simple.items()},
        complex_activities={str(k): [str(s) for s in v] for k, v in complex_acts.items()},
        recordings=recs,
        version=version,
    )
    return Dataset(root, manifest)


def write_dataset(path: str | Path, manifest: DatasetManifest,
                  recordings: dict[str, tuple[dict[str, np.ndarray], list[Segment]]]) -> None:
    """Write a dataset directory; `recordings` maps rec_id to (signals, segments)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for meta in manifest.recordings:
        signals, segments = recordings[meta.rec_id]
        rec_dir = root / meta.path
        rec_dir.mkdir(parents=True, exist_ok=True)
        for sensor in manifest.sensors:
            export_signal_csv(signals[sensor], rec_dir / f"{sensor}.csv")
        seg_doc = [{"start": s.start, "end": s.end, "simple": s.simple_id}
                   for s in segments]
        (rec_dir / "segments.json").write_text(
            json.dumps(seg_doc, indent=1) + "\n", encoding="utf-8")
    doc = {
        "version": manifest.version,
        "sample_rate_hz": manifest.sample_rate_hz,
        "sensors": list(manifest.sensors),
        "simple_activities": dict(manifest.simple_activities),
        "complex_activities": {k: list(v) for k, v in manifest.complex_activities.items()},
        "recordings": [
            {"id": m.rec_id, "subject": m.subject_id, "complex": m.complex_id,
             "path": m.path}
            for m in manifest.recordings
        ],
    }
    (root / "manifest.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def stacked_channels(recording: Recording, sensors: list[str]) -> np.ndarray:
    """Stack per-sensor 6xT signals into a (6*n_sensors, T) matrix in sensor order."""
    return np.concatenate([recording.signals[s] for s in sensors], axis=0)


# ---------------------------------------------------------------------------
# model files


def write_named_arrays(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    """Binary blob of named float32 arrays (little-endian, row-major)."""
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", MODEL_VERSION, len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def read_named_arrays(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"weight blob not found: {path}")
    blob = path.read_bytes()
    if blob[:4] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic, not a model weight blob")
    offset = 4

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise ModelFormatError(f"{path}: truncated blob at byte {offset}")
        chunk = blob[offset:offset + n]
        offset += n
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: weight blob version {version} unsupported")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(take(4 * size), dtype="<f4").astype(np.float64)
        arrays[name] = data.reshape(shape)
    if offset != len(blob):
        raise ModelFormatError(f"{path}: {len(blob) - offset} trailing bytes")
    return arrays


def write_model_dir(path: str | Path, manifest: dict,
                    arrays: dict[str, np.ndarray]) -> None:
    """Write model.manifest.json + model.weights.bin; the manifest gains an
    `arrays` index describing the blob."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    doc = dict(manifest)
    doc["format_version"] = MODEL_VERSION
    doc["arrays"] = [{"name": n, "shape": list(a.shape)} for n, a in arrays.items()]
    (out / "model.manifest.json").write_text(
        json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    write_named_arrays(out / "model.weights.bin", arrays)


def read_model_dir(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    root = Path(path)
    manifest_path = root / "model.manifest.json"
    if not manifest_path.exists():
        raise MissingFileError(f"no model.manifest.json under {root}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"model manifest is not valid JSON: {e}") from None
    if doc.get("format_version") != MODEL_VERSION:
        raise ModelFormatError(
            f"model format version {doc.get('format_version')} unsupported")
    arrays = read_named_arrays(root / "model.weights.bin")
    declared = {entry["name"]: tuple(entry["shape"]) for entry in doc.get("arrays", [])}
    if set(declared) != set(arrays):
        missing = set(declared) ^ set(arrays)
        raise ModelFormatError(f"manifest and blob disagree on arrays: {sorted(missing)}")
    for name, shape in declared.items():
        if arrays[name].shape != shape:
            raise ModelFormatError(
                f"array {name!r}: declared shape {shape}, blob has {arrays[name].shape}")
    return doc, arrays


def save_model(bundle, path: str | Path) -> None:
    """Persist a trained GanBundle as a model directory."""
    manifest, arrays = bundle.to_model_payload()
    write_model_dir(path, manifest, arrays)


def load_model(path: str | Path):
    """Load a GanBundle from a model directory."""
    from .gan import GanBundle  # local import to avoid a module cycle

    doc, arrays = read_model_dir(path)
    return GanBundle.from_model_payload(doc, arrays)
