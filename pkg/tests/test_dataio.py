import json
import struct

import numpy as np
import pytest

from theragan import dataio
from theragan.dataio import (DatasetManifest, ManifestError, MissingFileError,
                             ModelFormatError, RecordingMeta, Segment,
                             SegmentCoverageError, ShapeMismatchError,
                             export_signal_csv, import_signal_csv, load_dataset,
                             read_named_arrays, read_model_dir, stacked_channels,
                             write_dataset, write_model_dir, write_named_arrays)


def test_signal_csv_round_trip(tmp_path, rng):
    sig = rng.normal(scale=5.0, size=(6, 37))
    path = tmp_path / "s.csv"
    export_signal_csv(sig, path)
    back = import_signal_csv(path)
    assert back.shape == sig.shape
    # 9 significant digits
    assert np.abs(back - sig).max() <= np.abs(sig).max() * 1e-8


def test_signal_csv_exact_text_format(tmp_path):
    sig = np.zeros((6, 2))
    sig[0, 0] = 1.25
    sig[5, 1] = -3.0
    path = tmp_path / "s.csv"
    export_signal_csv(sig, path)
    text = path.read_text()
    lines = text.splitlines()
    assert lines[0] == "frame,gx,gy,gz,ax,ay,az"
    assert lines[1] == "0,1.25,0,0,0,0,0"
    assert lines[2] == "1,0,0,0,0,0,-3"
    assert text.endswith("\n")


def test_signal_csv_rejects_bad_shape(tmp_path):
    with pytest.raises(ShapeMismatchError):
        export_signal_csv(np.zeros((5, 10)), tmp_path / "x.csv")
    with pytest.raises(ShapeMismatchError):
        export_signal_csv(np.zeros(6), tmp_path / "x.csv")


def test_signal_csv_import_errors(tmp_path):
    with pytest.raises(MissingFileError):
        import_signal_csv(tmp_path / "nope.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("frame,a,b\n0,1,2\n")
    with pytest.raises(ShapeMismatchError, match="header"):
        import_signal_csv(bad)
    short_row = tmp_path / "short.csv"
    short_row.write_text("frame,gx,gy,gz,ax,ay,az\n0,1,2,3\n")
    with pytest.raises(ShapeMismatchError, match="fields"):
        import_signal_csv(short_row)


def _write_tiny_dataset(root, *, frames=40, mangle=None):
    sig = np.linspace(0.0, 1.0, 6 * frames).reshape(6, frames)
    manifest = DatasetManifest(
        sensors=["left_wrist"],
        simple_activities={"a": "arm_raise", "b": "wrist_twist"},
        complex_activities={"ab": ["a", "b"]},
        recordings=[RecordingMeta("r0", "s1", "ab", "recordings/r0")],
    )
    segments = [Segment(0, 25, "a"), Segment(25, frames, "b")]
    write_dataset(root, manifest, {"r0": ({"left_wrist": sig}, segments)})
    if mangle:
        mangle(root)
    return sig


def test_dataset_round_trip(tmp_path):
    sig = _write_tiny_dataset(tmp_path)
    ds = load_dataset(tmp_path)
    assert ds.recording_ids() == ["r0"]
    rec = ds.load_recording("r0")
    assert rec.subject_id == "s1"
    assert rec.complex_id == "ab"
    assert rec.n_frames == 40
    assert [(s.start, s.end, s.simple_id) for s in rec.segments] == \
        [(0, 25, "a"), (25, 40, "b")]
    assert np.abs(rec.signals["left_wrist"] - sig).max() < 1e-8
    assert stacked_channels(rec, ["left_wrist"]).shape == (6, 40)


def test_dataset_missing_manifest(tmp_path):
    with pytest.raises(MissingFileError):
        load_dataset(tmp_path / "nothing_here")


def test_dataset_manifest_validation(tmp_path):
    def rewrite(mutate):
        root = tmp_path / mutate.__name__
        _write_tiny_dataset(root)
        doc = json.loads((root / "manifest.json").read_text())
        mutate(doc)
        (root / "manifest.json").write_text(json.dumps(doc))
        return root

    def wrong_version(doc):
        doc["version"] = 99
    with pytest.raises(ManifestError, match="version"):
        load_dataset(rewrite(wrong_version))

    def wrong_rate(doc):
        doc["sample_rate_hz"] = 50
    with pytest.raises(ManifestError, match="sample_rate_hz"):
        load_dataset(rewrite(wrong_rate))

    def dup_sensors(doc):
        doc["sensors"] = ["left_wrist", "left_wrist"]
    with pytest.raises(ManifestError, match="unique"):
        load_dataset(rewrite(dup_sensors))

    def bad_complex(doc):
        doc["complex_activities"]["ab"] = ["a", "zz"]
    with pytest.raises(ManifestError, match="zz"):
        load_dataset(rewrite(bad_complex))

    def bad_rec_complex(doc):
        doc["recordings"][0]["complex"] = "nope"
    with pytest.raises(ManifestError, match="nope"):
        load_dataset(rewrite(bad_rec_complex))


def test_dataset_missing_signal_file(tmp_path):
    def rm(root):
        (root / "recordings" / "r0" / "left_wrist.csv").unlink()
    _write_tiny_dataset(tmp_path, mangle=rm)
    with pytest.raises(MissingFileError):
        load_dataset(tmp_path)


def test_dataset_segment_validation(tmp_path):
    def write_segments(segs):
        def mangle(root):
            (root / "recordings" / "r0" / "segments.json").write_text(
                json.dumps(segs))
        return mangle

    gap = tmp_path / "gap"
    _write_tiny_dataset(gap, mangle=write_segments(
        [{"start": 0, "end": 20, "simple": "a"},
         {"start": 25, "end": 40, "simple": "b"}]))
    with pytest.raises(SegmentCoverageError):
        load_dataset(gap).load_recording("r0")

    short = tmp_path / "short"
    _write_tiny_dataset(short, mangle=write_segments(
        [{"start": 0, "end": 30, "simple": "a"}]))
    with pytest.raises(SegmentCoverageError):
        load_dataset(short).load_recording("r0")

    overlap = tmp_path / "overlap"
    _write_tiny_dataset(overlap, mangle=write_segments(
        [{"start": 0, "end": 25, "simple": "a"},
         {"start": 20, "end": 40, "simple": "b"}]))
    with pytest.raises(SegmentCoverageError):
        load_dataset(overlap).load_recording("r0")

    unknown = tmp_path / "unknown"
    _write_tiny_dataset(unknown, mangle=write_segments(
        [{"start": 0, "end": 40, "simple": "zzz"}]))
    with pytest.raises(ManifestError, match="zzz"):
        load_dataset(unknown).load_recording("r0")


def test_error_hierarchy():
    for cls in (ManifestError, MissingFileError, ShapeMismatchError,
                SegmentCoverageError, ModelFormatError):
        assert issubclass(cls, dataio.DataError)


# ---------------------------------------------------------------------------
# weight blobs


def test_named_arrays_round_trip_bit_exact(tmp_path, rng):
    arrays = {
        "g/conv/w": rng.normal(size=(4, 3, 5)).astype(np.float32).astype(np.float64),
        "g/conv/b": rng.normal(size=4).astype(np.float32).astype(np.float64),
        "scalarish": rng.normal(size=(1,)).astype(np.float32).astype(np.float64),
    }
    path = tmp_path / "w.bin"
    write_named_arrays(path, arrays)
    back = read_named_arrays(path)
    assert set(back) == set(arrays)
    for name, arr in arrays.items():
        assert back[name].shape == arr.shape
        assert back[name].dtype == np.float64
        # values were f32 representable, so the round trip is exact
        assert np.array_equal(back[name], arr)


def test_named_arrays_write_is_deterministic(tmp_path, rng):
    arrays = {"a": rng.normal(size=(3, 3)), "b": rng.normal(size=7)}
    write_named_arrays(tmp_path / "w1.bin", arrays)
    write_named_arrays(tmp_path / "w2.bin", arrays)
    assert (tmp_path / "w1.bin").read_bytes() == (tmp_path / "w2.bin").read_bytes()


def test_named_arrays_binary_layout(tmp_path):
    write_named_arrays(tmp_path / "w.bin", {"ab": np.array([1.0, 2.0])})
    blob = (tmp_path / "w.bin").read_bytes()
    assert blob[:4] == b"TGMW"
    version, count = struct.unpack_from("<II", blob, 4)
    assert (version, count) == (1, 1)
    (name_len,) = struct.unpack_from("<I", blob, 12)
    assert name_len == 2
    assert blob[16:18] == b"ab"
    (ndim,) = struct.unpack_from("<I", blob, 18)
    assert ndim == 1
    (dim0,) = struct.unpack_from("<I", blob, 22)
    assert dim0 == 2
    vals = np.frombuffer(blob, dtype="<f4", count=2, offset=26)
    assert np.array_equal(vals, np.float32([1.0, 2.0]))
    assert len(blob) == 26 + 8


def test_named_arrays_corruption_errors(tmp_path, rng):
    path = tmp_path / "w.bin"
    write_named_arrays(path, {"x": rng.normal(size=(2, 2))})
    blob = path.read_bytes()

    bad_magic = tmp_path / "m.bin"
    bad_magic.write_bytes(b"NOPE" + blob[4:])
    with pytest.raises(ModelFormatError, match="magic"):
        read_named_arrays(bad_magic)

    truncated = tmp_path / "t.bin"
    truncated.write_bytes(blob[:-3])
    with pytest.raises(ModelFormatError, match="truncated"):
        read_named_arrays(truncated)

    trailing = tmp_path / "x.bin"
    trailing.write_bytes(blob + b"\x00\x00")
    with pytest.raises(ModelFormatError, match="trailing"):
        read_named_arrays(trailing)

    bad_version = tmp_path / "v.bin"
    bad_version.write_bytes(blob[:4] + struct.pack("<I", 9) + blob[8:])
    with pytest.raises(ModelFormatError, match="version"):
        read_named_arrays(bad_version)

    with pytest.raises(MissingFileError):
        read_named_arrays(tmp_path / "never.bin")


def test_model_dir_round_trip(tmp_path, rng):
    arrays = {"w": rng.normal(size=(2, 3)).astype(np.float32).astype(np.float64)}
    write_model_dir(tmp_path / "m", {"kind": "probe", "note": 5}, arrays)
    doc, back = read_model_dir(tmp_path / "m")
    assert doc["kind"] == "probe"
    assert doc["note"] == 5
    assert doc["format_version"] == 1
    assert doc["arrays"] == [{"name": "w", "shape": [2, 3]}]
    assert np.array_equal(back["w"], arrays["w"])


def test_model_dir_cross_validation(tmp_path, rng):
    arrays = {"w": rng.normal(size=(2, 3))}
    write_model_dir(tmp_path / "m", {"kind": "probe"}, arrays)

    # blob/manifest array-set mismatch
    doc = json.loads((tmp_path / "m" / "model.manifest.json").read_text())
    doc["arrays"].append({"name": "ghost", "shape": [1]})
    (tmp_path / "m" / "model.manifest.json").write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="ghost"):
        read_model_dir(tmp_path / "m")

    # declared shape mismatch
    write_model_dir(tmp_path / "m2", {"kind": "probe"}, arrays)
    doc = json.loads((tmp_path / "m2" / "model.manifest.json").read_text())
    doc["arrays"][0]["shape"] = [3, 2]
    (tmp_path / "m2" / "model.manifest.json").write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="shape"):
        read_model_dir(tmp_path / "m2")

    with pytest.raises(MissingFileError):
        read_model_dir(tmp_path / "empty")
