"""Length alignment, channel normalization, and windowing.

Training samples for a (simple activity, sensor) pair are variable-length
6-channel segments. They are brought to a common frame count M, scaled
per channel into [0, 1] with pooled extrema, and averaged into a single
conditioning matrix. Long recordings of complex activities are cut into
fixed windows for the classifier experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Dataset

WINDOW_FRAMES = 450
WINDOW_STRIDE = 225


# ---------------------------------------------------------------------------
# length alignment


def _spread_indices(count: int, space: int) -> np.ndarray:
    """`count` distinct indices spread evenly over range(space); count <= space."""
    return np.floor((np.arange(count) + 0.5) * space / count).astype(int)


def align_length(sample: np.ndarray, m_frames: int) -> np.ndarray:
    """Resize a (C, T) sample to (C, M) by dropping or inserting frames.

    Shrinking removes T-M evenly spread frames, identically in every
    channel. Growing inserts neighbor averages at evenly spread gaps
    (edge gaps duplicate the single neighbor); if more than T+1 frames
    are needed the insertion pass repeats on the grown signal.
    """
    x = np.array(sample, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a (C, T) sample, got shape {x.shape}")
    t = x.shape[1]
    if t < 2:
        raise ValueError(f"cannot align a sample of {t} frames")
    if m_frames < 2:
        raise ValueError(f"alignment target must be >= 2, got {m_frames}")
    if t == m_frames:
        return x
    if t > m_frames:
        drop = _spread_indices(t - m_frames, t)
        return np.delete(x, drop, axis=1)
    while x.shape[1] < m_frames:
        t = x.shape[1]
        count = min(m_frames - t, t + 1)
        gaps = _spread_indices(count, t + 1)
        for g in gaps[::-1]:  # right to left keeps earlier gap indices valid
            if g == 0:
                value = x[:, 0]
            elif g == t:
                value = x[:, t - 1]
            else:
                value = 0.5 * (x[:, g - 1] + x[:, g])
            x = np.insert(x, g, value, axis=1)
    return x


def compute_alignment_target(lengths) -> int:
    """Common frame count for a sample collection: the rounded mean length."""
    lengths = list(lengths)
    if not lengths:
        raise ValueError("no lengths to average")
    return max(2, int(np.floor(np.mean(lengths) + 0.5)))


# ---------------------------------------------------------------------------
# normalization


@dataclass
class NormParams:
    minimum: np.ndarray  # (C,)
    maximum: np.ndarray  # (C,)


def fit_norm(samples: list[np.ndarray]) -> NormParams:
    """Per-channel extrema pooled over every frame of every sample."""
    if not samples:
        raise ValueError("cannot fit normalization to an empty sample list")
    channels = samples[0].shape[0]
    lo = np.full(channels, np.inf)
    hi = np.full(channels, -np.inf)
    for x in samples:
        if x.shape[0] != channels:
            raise ValueError(
                f"inconsistent channel counts: {x.shape[0]} vs {channels}")
        lo = np.minimum(lo, x.min(axis=1))
        hi = np.maximum(hi, x.max(axis=1))
    flat = np.flatnonzero(hi == lo)
    if flat.size:
        raise ValueError(
            f"channel {flat[0]} is constant over the sample pool; cannot "
            f"normalize a zero range")
    return NormParams(minimum=lo, maximum=hi)


def normalize(sample: np.ndarray, params: NormParams) -> np.ndarray:
    span = params.maximum - params.minimum
    return (sample - params.minimum[:, None]) / span[:, None]


def denormalize(sample: np.ndarray, params: NormParams) -> np.ndarray:
    span = params.maximum - params.minimum
    return sample * span[:, None] + params.minimum[:, None]


# ---------------------------------------------------------------------------
# windowing


def window_count(n_frames: int, width: int = WINDOW_FRAMES,
                 stride: int = WINDOW_STRIDE) -> int:
    if width < 1 or stride < 1:
        raise ValueError("window width and stride must be positive")
    if n_frames < width:
        return 0
    return (n_frames - width) // stride + 1


def window_signal(signal: np.ndarray, width: int = WINDOW_FRAMES,
                  stride: int = WINDOW_STRIDE) -> np.ndarray:
    """Cut a (C, T) signal into (N, C, width) sliding windows."""
    n = window_count(signal.shape[1], width, stride)
    out = np.empty((n, signal.shape[0], width))
    for i in range(n):
        out[i] = signal[:, i * stride:i * stride + width]
    return out


# ---------------------------------------------------------------------------
# training-set assembly


def collect_simple_samples(dataset: Dataset, simple_id: str,
                           sensor: str) -> list[np.ndarray]:
    """All raw (6, T) segments of one simple activity seen by one sensor."""
    samples = []
    for rec in dataset.iter_recordings():
        signal = rec.signals[sensor]
        for seg in rec.segments:
            if seg.simple_id == simple_id:
                samples.append(signal[:, seg.start:seg.end])
    return samples


@dataclass
class PreparedSamples:
    """Normalized, length-aligned training inputs for one (activity, sensor)."""
    simple_id: str
    sensor: str
    m_frames: int
    norm: NormParams
    samples: np.ndarray  # (N, 6, M) in [0, 1]
    x_average: np.ndarray  # (6, M)


def prepare_training_set(dataset: Dataset, simple_id: str, sensor: str,
                         m_frames: int | None = None) -> PreparedSamples:
    raw = collect_simple_samples(dataset, simple_id, sensor)
    if not raw:
        raise ValueError(
            f"dataset holds no samples of activity {simple_id!r} on sensor "
            f"{sensor!r}")
    if m_frames is None:
        m_frames = compute_alignment_target(x.shape[1] for x in raw)
    aligned = [align_length(x, m_frames) for x in raw]
    norm = fit_norm(aligned)
    stacked = np.stack([normalize(x, norm) for x in aligned])
    return PreparedSamples(
        simple_id=simple_id,
        sensor=sensor,
        m_frames=m_frames,
        norm=norm,
        samples=stacked,
        x_average=stacked.mean(axis=0),
    )
