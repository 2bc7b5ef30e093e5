"""Synthetic kinematic IMU corpus.

Each simple activity is a motion primitive: per rotation axis, a sum of
sinusoidal joint-angle terms. A body-worn sensor sitting a lever arm away
from the joint observes

    gyro  = dtheta/dt                                  (analytic, rad/s)
    accel = alpha x r + omega x (omega x r) + R^T g    (m/s^2)

where alpha is the angular acceleration, r the lever arm, and R the
orientation built from the joint angles (gravity g points along world z).
Everything is closed form, so tests can check the channels against
independent derivations of the same trajectories.

Subjects differ by amplitude and tempo scales; recordings add per-sample
tempo and amplitude jitter plus optional white measurement noise. A complex
activity is its simple activities executed back to back.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataio import (Dataset, DatasetManifest, RecordingMeta, SAMPLE_RATE_HZ,
                     SENSOR_IDS, Segment, load_dataset, write_dataset)
from .seeds import derive_rng, stable_hash

GRAVITY = 9.81
MIN_FRAMES = 10


@dataclass(frozen=True)
class SinusoidTerm:
    amplitude: float  # rad
    frequency_hz: float
    phase: float  # rad


@dataclass(frozen=True)
class MotionPrimitive:
    name: str
    duration_s: float
    axis_terms: tuple[tuple[SinusoidTerm, ...],
                      tuple[SinusoidTerm, ...],
                      tuple[SinusoidTerm, ...]]
    lever_arm: tuple[float, float, float]  # m
    base_tilt: tuple[float, float, float] = (0.0, 0.0, 0.0)  # rad


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    amplitude_scale: float = 1.0
    tempo_scale: float = 1.0


def n_frames_for(primitive: MotionPrimitive, profile: SubjectProfile) -> int:
    """Frame count at 100 Hz; faster tempo shortens the recording."""
    n = int(round(SAMPLE_RATE_HZ * primitive.duration_s / profile.tempo_scale))
    if n < MIN_FRAMES:
        raise ValueError(
            f"primitive {primitive.name!r} at tempo {profile.tempo_scale} yields "
            f"only {n} frames; need at least {MIN_FRAMES}")
    return n


def _time_grid(n_frames: int) -> np.ndarray:
    return np.arange(n_frames) / SAMPLE_RATE_HZ


def joint_angles(primitive: MotionPrimitive, profile: SubjectProfile,
                 n_frames: int | None = None) -> np.ndarray:
    """Latent joint-angle trajectories, shape (3, T)."""
    if n_frames is None:
        n_frames = n_frames_for(primitive, profile)
    t = _time_grid(n_frames)
    out = np.empty((3, n_frames))
    for axis in range(3):
        theta = np.full(n_frames, primitive.base_tilt[axis])
        for term in primitive.axis_terms[axis]:
            w = 2.0 * np.pi * term.frequency_hz * profile.tempo_scale
            theta = theta + profile.amplitude_scale * term.amplitude * np.sin(
                w * t + term.phase)
        out[axis] = theta
    return out


def angular_velocity(primitive: MotionPrimitive, profile: SubjectProfile,
                     n_frames: int | None = None) -> np.ndarray:
    if n_frames is None:
        n_frames = n_frames_for(primitive, profile)
    t = _time_grid(n_frames)
    out = np.zeros((3, n_frames))
    for axis in range(3):
        for term in primitive.axis_terms[axis]:
            w = 2.0 * np.pi * term.frequency_hz * profile.tempo_scale
            out[axis] += profile.amplitude_scale * term.amplitude * w * np.cos(
                w * t + term.phase)
    return out


def angular_acceleration(primitive: MotionPrimitive, profile: SubjectProfile,
                         n_frames: int | None = None) -> np.ndarray:
    if n_frames is None:
        n_frames = n_frames_for(primitive, profile)
    t = _time_grid(n_frames)
    out = np.zeros((3, n_frames))
    for axis in range(3):
        for term in primitive.axis_terms[axis]:
            w = 2.0 * np.pi * term.frequency_hz * profile.tempo_scale
            out[axis] -= profile.amplitude_scale * term.amplitude * w * w * np.sin(
                w * t + term.phase)
    return out


def gravity_in_sensor_frame(theta: np.ndarray) -> np.ndarray:
    """Project world gravity through R = Rz Ry Rx built from angles (3, T).

    Only the bottom row of R matters; rotation about the gravity axis
    drops out.
    """
    tx, ty = theta[0], theta[1]
    return GRAVITY * np.stack([-np.sin(ty),
                               np.cos(ty) * np.sin(tx),
                               np.cos(ty) * np.cos(tx)])


def synth_simple(primitive: MotionPrimitive, profile: SubjectProfile, *,
                 noise_sigma: float = 0.0,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """One noiseless-by-default sample of a simple activity, shape (6, T)."""
    n = n_frames_for(primitive, profile)
    theta = joint_angles(primitive, profile, n)
    omega = angular_velocity(primitive, profile, n)
    alpha = angular_acceleration(primitive, profile, n)
    r = np.asarray(primitive.lever_arm).reshape(3, 1)
    tangential = np.cross(alpha, np.broadcast_to(r, alpha.shape), axis=0)
    centripetal = np.cross(omega, np.cross(omega, np.broadcast_to(r, omega.shape),
                                           axis=0), axis=0)
    accel = tangential + centripetal + gravity_in_sensor_frame(theta)
    signal = np.concatenate([omega, accel], axis=0)
    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        signal = signal + rng.normal(0.0, noise_sigma, signal.shape)
    return signal


def sensor_variant(primitive: MotionPrimitive, sensor_id: str) -> MotionPrimitive:
    """Deterministic per-sensor re-parameterization of a primitive.

    Different body placements see the same movement with shifted phases,
    rescaled amplitudes, and a different lever arm. Duration is preserved so
    every sensor of a recording has the same frame count.
    """
    rng = derive_rng(stable_hash(primitive.name), "sensor-variant", sensor_id)
    axes = []
    for terms in primitive.axis_terms:
        new_terms = []
        for term in terms:
            new_terms.append(SinusoidTerm(
                amplitude=term.amplitude * rng.uniform(0.6, 1.4),
                frequency_hz=term.frequency_hz,
                phase=term.phase + rng.uniform(-np.pi / 2, np.pi / 2),
            ))
        axes.append(tuple(new_terms))
    lever = tuple(v * rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
                  for v in primitive.lever_arm)
    tilt = tuple(v + rng.uniform(-0.3, 0.3) for v in primitive.base_tilt)
    return replace(primitive, name=f"{primitive.name}@{sensor_id}",
                   axis_terms=tuple(axes), lever_arm=lever, base_tilt=tilt)


def _terms(*specs: tuple[float, float, float]) -> tuple[SinusoidTerm, ...]:
    return tuple(SinusoidTerm(a, f, p) for a, f, p in specs)


def default_primitives() -> dict[str, MotionPrimitive]:
    """Catalog of named simple activities for rehabilitation-style movement."""
    return {p.name: p for p in (
        MotionPrimitive(
            "arm_raise", 1.6,
            (_terms((0.70, 0.625, -1.571)),
             _terms((0.15, 1.25, 0.40)),
             _terms((0.05, 1.875, 1.10))),
            lever_arm=(0.02, 0.24, 0.03), base_tilt=(0.10, -0.05, 0.0)),
        MotionPrimitive(
            "arm_lower", 1.6,
            (_terms((0.70, 0.625, 1.571)),
             _terms((0.12, 1.25, -0.70)),
             _terms((0.06, 1.875, 0.30))),
            lever_arm=(0.02, 0.24, -0.03), base_tilt=(-0.10, 0.05, 0.0)),
        MotionPrimitive(
            "wrist_twist", 1.2,
            (_terms((0.10, 1.667, 0.0)),
             _terms((0.08, 0.833, 0.90)),
             _terms((0.60, 1.667, -0.50), (0.12, 3.333, 0.20))),
            lever_arm=(0.05, 0.08, 0.02), base_tilt=(0.0, 0.15, 0.0)),
        MotionPrimitive(
            "reach_forward", 2.0,
            (_terms((0.45, 0.5, -1.20), (0.10, 1.5, 0.60)),
             _terms((0.55, 0.5, 0.0)),
             _terms((0.08, 1.0, 1.40))),
            lever_arm=(0.03, 0.28, 0.04), base_tilt=(0.05, 0.0, 0.0)),
        MotionPrimitive(
            "leg_swing", 1.4,
            (_terms((0.65, 0.714, 0.0), (0.08, 2.143, -0.30)),
             _terms((0.10, 1.429, 0.80)),
             _terms((0.06, 0.714, -1.00))),
            lever_arm=(0.04, 0.32, 0.02), base_tilt=(0.0, -0.10, 0.0)),
        MotionPrimitive(
            "knee_bend", 1.8,
            (_terms((0.80, 0.556, -1.571), (0.06, 1.667, 0.90)),
             _terms((0.05, 1.111, 0.0)),
             _terms((0.04, 0.556, 0.50))),
            lever_arm=(0.02, 0.30, 0.05), base_tilt=(0.20, 0.0, 0.0)),
        MotionPrimitive(
            "torso_turn", 2.2,
            (_terms((0.08, 0.909, 0.30)),
             _terms((0.12, 0.455, -0.60)),
             _terms((0.55, 0.455, 0.0), (0.10, 1.364, 1.20))),
            lever_arm=(0.10, 0.12, 0.08), base_tilt=(0.0, 0.0, 0.0)),
        MotionPrimitive(
            "rest_hold", 1.0,
            (_terms((0.03, 0.8, 0.0)),
             _terms((0.02, 1.1, 0.50)),
             _terms((0.02, 0.6, -0.40))),
            lever_arm=(0.03, 0.10, 0.03), base_tilt=(0.05, 0.05, 0.0)),
    )}


@dataclass
class CorpusSpec:
    """Recipe for a synthetic dataset.

    `simple_activities` maps dataset ids to primitive catalog names;
    `complex_activities` maps ids to ordered lists of simple ids. Every
    subject performs every complex activity `samples_per_subject` times.
    """
    sensors: list[str]
    simple_activities: dict[str, str]
    complex_activities: dict[str, list[str]]
    subjects: list[str]
    samples_per_subject: int = 1
    noise_sigma: float = 0.01
    tempo_jitter: tuple[float, float] = (0.9, 1.1)
    amplitude_jitter: tuple[float, float] = (0.9, 1.1)
    primitives: dict[str, MotionPrimitive] = field(default_factory=default_primitives)


def subject_profile(subject_id: str, master_seed: int) -> SubjectProfile:
    rng = derive_rng(master_seed, "subject", subject_id)
    return SubjectProfile(subject_id,
                          amplitude_scale=rng.uniform(0.85, 1.15),
                          tempo_scale=rng.uniform(0.9, 1.1))


def _validate_spec(spec: CorpusSpec) -> None:
    if not spec.sensors:
        raise ValueError("corpus spec needs at least one sensor")
    if tuple(spec.sensors) != SENSOR_IDS[:len(spec.sensors)]:
        raise ValueError(
            f"sensors must be a prefix of {list(SENSOR_IDS)}, got {spec.sensors}")
    if not spec.subjects:
        raise ValueError("corpus spec needs at least one subject")
    if spec.samples_per_subject < 1:
        raise ValueError("samples_per_subject must be positive")
    for sid, prim_name in spec.simple_activities.items():
        if prim_name not in spec.primitives:
            raise ValueError(f"simple activity {sid!r} references unknown "
                             f"primitive {prim_name!r}")
    if not spec.complex_activities:
        raise ValueError("corpus spec needs at least one complex activity")
    for cid, parts in spec.complex_activities.items():
        if not parts:
            raise ValueError(f"complex activity {cid!r} is empty")
        for sid in parts:
            if sid not in spec.simple_activities:
                raise ValueError(f"complex activity {cid!r} references unknown "
                                 f"simple id {sid!r}")
    lo, hi = spec.tempo_jitter
    if not (0.0 < lo <= hi):
        raise ValueError(f"bad tempo_jitter range {spec.tempo_jitter}")
    lo, hi = spec.amplitude_jitter
    if not (0.0 < lo <= hi):
        raise ValueError(f"bad amplitude_jitter range {spec.amplitude_jitter}")


def synth_corpus(spec: CorpusSpec, out_dir, master_seed: int) -> Dataset:
    """Generate a dataset directory and return it loaded and validated."""
    _validate_spec(spec)
    variants = {
        (sid, sensor): sensor_variant(spec.primitives[name], sensor)
        for sid, name in spec.simple_activities.items()
        for sensor in spec.sensors
    }
    metas: list[RecordingMeta] = []
    recordings: dict[str, tuple[dict[str, np.ndarray], list[Segment]]] = {}
    counter = 0
    for subject in spec.subjects:
        base = subject_profile(subject, master_seed)
        for complex_id, parts in spec.complex_activities.items():
            for k in range(spec.samples_per_subject):
                rng = derive_rng(master_seed, "sample", subject, complex_id, k)
                eff = SubjectProfile(
                    subject,
                    amplitude_scale=base.amplitude_scale * rng.uniform(
                        *spec.amplitude_jitter),
                    tempo_scale=base.tempo_scale * rng.uniform(*spec.tempo_jitter),
                )
                chunks: dict[str, list[np.ndarray]] = {s: [] for s in spec.sensors}
                segments: list[Segment] = []
                cursor = 0
                for sid in parts:
                    length = None
                    for sensor in spec.sensors:
                        sig = synth_simple(variants[(sid, sensor)], eff,
                                           noise_sigma=spec.noise_sigma, rng=rng)
                        chunks[sensor].append(sig)
                        length = sig.shape[1]
                    segments.append(Segment(cursor, cursor + length, sid))
                    cursor += length
                rec_id = f"r{counter:04d}"
                counter += 1
                metas.append(RecordingMeta(rec_id, subject, complex_id,
                                           f"recordings/{rec_id}"))
                signals = {s: np.concatenate(chunks[s], axis=1)
                           for s in spec.sensors}
                recordings[rec_id] = (signals, segments)
    manifest = DatasetManifest(
        sensors=list(spec.sensors),
        simple_activities=dict(spec.simple_activities),
        complex_activities={k: list(v) for k, v in spec.complex_activities.items()},
        recordings=metas,
    )
    write_dataset(out_dir, manifest, recordings)
    return load_dataset(out_dir)
