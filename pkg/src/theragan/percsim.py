"""Perceptual similarity between signal collections.

Each 6-channel signal is mapped to a stack of log-magnitude spectrograms,
pushed through a small fixed (never trained) random convolutional feature
extractor, and reduced to a unit-norm 32-d embedding. The similarity
distance S_d between a generated and a real collection is the euclidean
distance between their mean embeddings; lower is more similar, and GAN
training stops early once S_d falls under its threshold.

The extractor is a deterministic stand-in for a large pretrained network:
its weights come from a fixed seed and never change. Externally computed
feature vectors can be swapped in through the CSV import/export helpers
and `similarity_from_features`.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DB_FLOOR = 1e-9
FEATURE_SEED = 901
FEATURE_DIM = 32


@dataclass(frozen=True)
class SpectrogramConfig:
    window: int = 64
    hop: int = 16

    def __post_init__(self):
        if not (self.window >= self.hop >= 1):
            raise ValueError(f"need window >= hop >= 1, got {self.window}/{self.hop}")


def hann_window(width: int) -> np.ndarray:
    """Periodic Hann window."""
    n = np.arange(width)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / width)


def stft_magnitude(signal: np.ndarray,
                   config: SpectrogramConfig = SpectrogramConfig()) -> np.ndarray:
    """Linear STFT magnitude of a (C, L) signal, shape (C, window//2+1, frames).

    Signals shorter than one window are zero-padded to a single frame.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a (C, L) signal, got shape {x.shape}")
    w, h = config.window, config.hop
    if x.shape[1] < w:
        x = np.pad(x, ((0, 0), (0, w - x.shape[1])))
    frames = 1 + (x.shape[1] - w) // h
    taper = hann_window(w)
    out = np.empty((x.shape[0], w // 2 + 1, frames))
    for i in range(frames):
        chunk = x[:, i * h:i * h + w] * taper
        out[:, :, i] = np.abs(np.fft.rfft(chunk, axis=1))
    return out


def spectrogram(signal: np.ndarray,
                config: SpectrogramConfig = SpectrogramConfig()) -> np.ndarray:
    """Per-channel log-magnitude spectrogram stack in dB, shape (C, bins, frames)."""
    return 20.0 * np.log10(stft_magnitude(signal, config) + DB_FLOOR)


def _conv2d(x: np.ndarray, w: np.ndarray, stride: int = 2,
            pad: int = 1) -> np.ndarray:
    """Forward-only 3x3 convolution; x is (N, C, H, W)."""
    n, ci, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - 3) // stride + 1
    wo = (wd + 2 * pad - 3) // stride + 1
    out = np.zeros((n, w.shape[0], ho, wo))
    for dy in range(3):
        for dx in range(3):
            patch = xp[:, :, dy:dy + stride * ho:stride, dx:dx + stride * wo:stride]
            out += np.tensordot(patch, w[:, :, dy, dx],
                                axes=([1], [1])).transpose(0, 3, 1, 2)
    return out


class FeatureExtractor:
    """Frozen random conv net over spectrogram stacks.

    Three bias-free 3x3 stride-2 conv stages (8, 16, 32 channels) with
    ReLU, then a global average pool to a 32-d vector normalized to unit
    length. Bias-free + ReLU means an all-zero input maps to the zero
    vector, which is left unnormalized.
    """

    CHANNELS = (8, 16, FEATURE_DIM)

    def __init__(self, in_channels: int = 6, seed: int = FEATURE_SEED,
                 config: SpectrogramConfig = SpectrogramConfig()):
        self.in_channels = in_channels
        self.seed = seed
        self.config = config
        rng = np.random.Generator(np.random.PCG64(seed))
        self.weights = []
        prev = in_channels
        for ch in self.CHANNELS:
            scale = np.sqrt(2.0 / (prev * 9))
            self.weights.append(rng.normal(0.0, scale, (ch, prev, 3, 3)))
            prev = ch

    def extract_features(self, spec_map: np.ndarray) -> np.ndarray:
        """Unit-norm feature vector (32,) of one spectrogram stack (C, H, W)."""
        return self.extract_features_batch(spec_map[None])[0]

    def extract_features_batch(self, spec_maps: np.ndarray) -> np.ndarray:
        maps = np.asarray(spec_maps, dtype=np.float64)
        if maps.ndim != 4 or maps.shape[1] != self.in_channels:
            raise ValueError(
                f"expected (N, {self.in_channels}, H, W) spectrogram stacks, "
                f"got shape {maps.shape}")
        for w in self.weights:
            maps = np.maximum(_conv2d(maps, w), 0.0)
        emb = maps.mean(axis=(2, 3))
        norms = np.linalg.norm(emb, axis=1, keepdims=True)
        return emb / np.where(norms > 0.0, norms, 1.0)

    def features(self, signals: np.ndarray) -> np.ndarray:
        """Unit-norm embeddings of a (N, C, L) signal collection, shape (N, 32)."""
        signals = np.asarray(signals, dtype=np.float64)
        if signals.ndim != 3 or signals.shape[1] != self.in_channels:
            raise ValueError(
                f"expected (N, {self.in_channels}, L) signals, got shape "
                f"{signals.shape}")
        if signals.shape[0] == 0:
            raise ValueError("empty signal batch")
        maps = np.stack([spectrogram(s, self.config) for s in signals])
        return self.extract_features_batch(maps)


def mean_feature(signals: np.ndarray,
                 extractor: FeatureExtractor | None = None) -> np.ndarray:
    if extractor is None:
        extractor = FeatureExtractor(signals.shape[1])
    return extractor.features(signals).mean(axis=0)


def similarity_distance(generated: np.ndarray, real: np.ndarray,
                        extractor: FeatureExtractor | None = None) -> float:
    """S_d: euclidean distance between mean embeddings of two collections."""
    generated = np.asarray(generated, dtype=np.float64)
    real = np.asarray(real, dtype=np.float64)
    if generated.ndim != 3 or real.ndim != 3:
        raise ValueError("similarity_distance expects (N, C, L) collections")
    if generated.shape[0] == 0 or real.shape[0] == 0:
        raise ValueError("empty signal batch")
    if generated.shape[1] != real.shape[1]:
        raise ValueError(
            f"channel mismatch: {generated.shape[1]} vs {real.shape[1]}")
    if extractor is None:
        extractor = FeatureExtractor(generated.shape[1])
    delta = mean_feature(generated, extractor) - mean_feature(real, extractor)
    return float(np.linalg.norm(delta))


def similarity_from_features(generated: np.ndarray, real: np.ndarray) -> float:
    """S_d from precomputed per-sample feature rows (the external-extractor hook)."""
    generated = np.atleast_2d(np.asarray(generated, dtype=np.float64))
    real = np.atleast_2d(np.asarray(real, dtype=np.float64))
    if generated.shape[0] == 0 or real.shape[0] == 0:
        raise ValueError("empty feature batch")
    if generated.shape[1] != real.shape[1]:
        raise ValueError(
            f"feature width mismatch: {generated.shape[1]} vs {real.shape[1]}")
    return float(np.linalg.norm(generated.mean(axis=0) - real.mean(axis=0)))


def export_features_csv(features: np.ndarray, path: str | Path) -> None:
    """One feature vector per row, 9 significant digits."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    lines = [",".join(f"{v:.9g}" for v in row) for row in features]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_features_csv(path: str | Path) -> np.ndarray:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty feature file")
    rows = [[float(v) for v in line.split(",")] for line in lines]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: rows disagree on feature width")
    return np.asarray(rows)
