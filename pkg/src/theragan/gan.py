"""Conditional GAN for 6-channel activity signals.

One bundle per (simple activity, sensor) pair: a generator conditioned on
the activity's average signal, plus a dual discriminator whose temporal
classifier reads the raw signal and whose frequency classifier reads its
DFT magnitude. The discriminator score is the mean of the two classifier
outputs.

Training follows a fixed control flow per epoch: build one combined batch
of generated and real samples, update both discriminator classifiers on it
until their losses pass a threshold or an iteration cap; then draw fresh
noise and update the generator through the frozen averaged discriminator
until its loss passes a threshold or cap; finally score the generator with
a perceptual similarity distance, which also decides early termination.
The loop skeleton lives in `run_training_loop` and is driven through a
phases object so its branching can be exercised with scripted losses.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import asdict, dataclass, field

import numpy as np

from . import percsim
from .dataio import ModelFormatError, SENSOR_IDS
from .diffnet import (Adam, AvgPool, Concat, Conv1d, Dense, DftMagnitude,
                      Flatten, GaussianNoise, LeakyRelu, Network, PadRight,
                      Relu, Reshape, SepConv1d, Sigmoid, TConv1d, Trim,
                      bce_loss, conv_out_len)
from .preprocess import NormParams, PreparedSamples, denormalize
from .seeds import derive_rng

SIGNAL_CHANNELS = 6


@dataclass(frozen=True)
class NoiseSpec:
    dimension: int = 128
    mean: float = 0.0
    std: float = 1.0


@dataclass
class TrainConfig:
    noise_dim: int = 128
    batch_size: int = 32
    disc_loss_threshold: float = 0.1
    disc_count_max: int = 20
    gen_loss_threshold: float = 0.12
    gen_count_max: int = 50
    epoch_max: int = 90
    similarity_threshold: float = 0.1
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if self.noise_dim < 1:
            raise ValueError("noise_dim must be >= 1")
        if self.batch_size < 2 or self.batch_size % 2:
            raise ValueError(
                "batch_size must be even (the discriminator batch is half "
                "generated, half real) and >= 2")
        for name in ("disc_loss_threshold", "gen_loss_threshold",
                     "similarity_threshold", "learning_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("disc_count_max", "gen_count_max", "epoch_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


class TrainingDivergedError(RuntimeError):
    """A loss or similarity value stopped being finite."""


# ---------------------------------------------------------------------------
# architectures


def build_generator(m_frames: int, noise_dim: int = 128) -> Network:
    """Generator: (noise, condition 6xM) -> 6xM signal in (0, 1).

    M is padded to the next multiple of 4 internally so the two stride-2
    upsampling stages land on exact lengths; the surplus is trimmed off.
    The condition is average-pooled to the noise feature-map length and
    concatenated channel-wise before an inception-style block of
    transposed convolutions with kernel sizes 3, 5, and 9.
    """
    if m_frames < 8:
        raise ValueError(f"generator needs at least 8 frames, got {m_frames}")
    if noise_dim < 1:
        raise ValueError("noise_dim must be >= 1")
    m_net = 4 * math.ceil(m_frames / 4)
    q = m_net // 4
    net = Network(["noise", "condition"])
    net.add("cond_pad", PadRight(m_net - m_frames), "condition")
    net.add("cond_pool", AvgPool(4, 4), "cond_pad")
    net.add("noise_proj", Dense(noise_dim, 16 * q), "noise")
    net.add("noise_map", Reshape(16, q), "noise_proj")
    net.add("merge", Concat(), ["noise_map", "cond_pool"])
    for k in (3, 5, 9):
        net.add(f"branch_k{k}", TConv1d(16 + SIGNAL_CHANNELS, 8, k, stride=2,
                                        pad=(k - 1) // 2), "merge")
    net.add("inception", Concat(), ["branch_k3", "branch_k5", "branch_k9"])
    net.add("inception_act", Relu(), "inception")
    net.add("up", TConv1d(24, 16, 4, stride=2, pad=0), "inception_act")
    net.add("up_act", Relu(), "up")
    net.add("refine", Conv1d(16, 16, 3, stride=1, pad=1), "up_act")
    net.add("refine_act", Relu(), "refine")
    net.add("smooth", AvgPool(3, 1, pad=1), "refine_act")
    net.add("head", Conv1d(16, SIGNAL_CHANNELS, 3, stride=1, pad=1), "smooth")
    net.add("trim", Trim(m_frames), "head")
    net.add("out", Sigmoid(), "trim")
    return net


def build_discriminator(m_frames: int) -> tuple[Network, Network]:
    """Dual discriminator: (temporal, frequency), each 6xM -> score in (0, 1).

    The frequency classifier sees the per-channel DFT magnitude with
    additive gaussian noise while it is being trained (train mode only).
    """
    if m_frames < 8:
        raise ValueError(f"discriminator needs at least 8 frames, got {m_frames}")
    temporal = Network(["signal"])
    src = "signal"
    channels = SIGNAL_CHANNELS
    length = m_frames
    for i, out_ch in enumerate((16, 32, 64)):
        temporal.add(f"conv{i}", Conv1d(channels, out_ch, 5, stride=2, pad=2), src)
        src = temporal.add(f"act{i}", LeakyRelu(0.01), f"conv{i}")
        channels = out_ch
        length = conv_out_len(length, 5, 2, 2)
    temporal.add("flat", Flatten(), src)
    temporal.add("fc0", Dense(channels * length, 64), "flat")
    temporal.add("fc0_act", LeakyRelu(0.01), "fc0")
    temporal.add("fc1", Dense(64, 1), "fc0_act")
    temporal.add("out", Sigmoid(), "fc1")

    frequency = Network(["signal"])
    bins = m_frames // 2 + 1
    frequency.add("dft", DftMagnitude(), "signal")
    frequency.add("noise", GaussianNoise(0.05), "dft")
    frequency.add("sep0", SepConv1d(SIGNAL_CHANNELS, 16, 3, stride=2, pad=1), "noise")
    frequency.add("sep0_act", LeakyRelu(0.01), "sep0")
    frequency.add("sep1", SepConv1d(16, 32, 3, stride=2, pad=1), "sep0_act")
    frequency.add("sep1_act", LeakyRelu(0.01), "sep1")
    length = conv_out_len(conv_out_len(bins, 3, 2, 1), 3, 2, 1)
    frequency.add("flat", Flatten(), "sep1_act")
    frequency.add("fc0", Dense(32 * length, 32), "flat")
    frequency.add("fc0_act", LeakyRelu(0.01), "fc0")
    frequency.add("fc1", Dense(32, 1), "fc0_act")
    frequency.add("out", Sigmoid(), "fc1")
    return temporal, frequency


def discriminate(temporal_out, frequency_out):
    """Combined discriminator score: the mean of the two classifier outputs."""
    return 0.5 * (temporal_out + frequency_out)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class EpochRecord:
    epoch: int
    disc_iters: int
    gen_iters: int
    temporal_loss: float
    frequency_loss: float
    generator_loss: float
    similarity: float


def run_training_loop(phases, config: TrainConfig) -> list[EpochRecord]:
    """The training control flow, independent of what the phases compute.

    Per epoch: `prepare_epoch` builds the fixed combined discriminator
    batch; `disc_step` repeats until both losses drop below
    disc_loss_threshold or the count exceeds disc_count_max;
    `prepare_generator_phase` draws the fresh noise batch; `gen_step`
    repeats until the generator loss drops below gen_loss_threshold or the
    count exceeds gen_count_max; `similarity` closes the epoch and ends
    training once below similarity_threshold, as does exceeding epoch_max.
    Counters restart every epoch.
    """
    records: list[EpochRecord] = []
    epoch = 0
    while True:
        epoch += 1
        phases.prepare_epoch(epoch)
        disc_count = 0
        while True:
            t_loss, f_loss = phases.disc_step()
            disc_count += 1
            if not (np.isfinite(t_loss) and np.isfinite(f_loss)):
                raise TrainingDivergedError(
                    f"non-finite discriminator loss at epoch {epoch}, iteration "
                    f"{disc_count}: temporal={t_loss}, frequency={f_loss}")
            if (t_loss < config.disc_loss_threshold
                    and f_loss < config.disc_loss_threshold) \
                    or disc_count > config.disc_count_max:
                break
        phases.prepare_generator_phase()
        gen_count = 0
        while True:
            g_loss = phases.gen_step()
            gen_count += 1
            if not np.isfinite(g_loss):
                raise TrainingDivergedError(
                    f"non-finite generator loss at epoch {epoch}, iteration "
                    f"{gen_count}: {g_loss}")
            if g_loss < config.gen_loss_threshold or gen_count > config.gen_count_max:
                break
        s_d = phases.similarity()
        if not np.isfinite(s_d):
            raise TrainingDivergedError(
                f"non-finite similarity at epoch {epoch}: {s_d}")
        records.append(EpochRecord(epoch, disc_count, gen_count, float(t_loss),
                                   float(f_loss), float(g_loss), float(s_d)))
        if s_d < config.similarity_threshold or epoch > config.epoch_max:
            return records


class _NetworkPhases:
    """Training phases bound to actual networks and data.

    One sequential rng stream drives real-sample picks, the frequency
    classifier's train-mode noise, and every noise batch, so a run is
    fully reproducible from its seed.
    """

    def __init__(self, prepared: PreparedSamples, config: TrainConfig,
                 similarity_fn, rng: np.random.Generator,
                 gen: Network, temporal: Network, frequency: Network):
        self.prepared = prepared
        self.config = config
        self.similarity_fn = similarity_fn
        self.rng = rng
        self.gen = gen
        self.temporal = temporal
        self.frequency = frequency
        lr, b1, b2 = config.learning_rate, config.beta1, config.beta2
        self.opt_g = Adam(gen.named_params(), lr, b1, b2)
        self.opt_t = Adam(temporal.named_params(), lr, b1, b2)
        self.opt_f = Adam(frequency.named_params(), lr, b1, b2)
        shape = prepared.x_average.shape
        half = config.batch_size // 2
        self.cond_half = np.broadcast_to(prepared.x_average, (half,) + shape).copy()
        self.cond_full = np.broadcast_to(prepared.x_average,
                                         (config.batch_size,) + shape).copy()
        self.gen_labels = np.ones((config.batch_size, 1))
        self.disc_batch: np.ndarray | None = None
        self.disc_labels: np.ndarray | None = None
        self.gen_noise: np.ndarray | None = None

    def prepare_epoch(self, epoch: int) -> None:
        half = self.config.batch_size // 2
        noise = self.rng.standard_normal((half, self.config.noise_dim))
        fakes = self.gen.forward({"noise": noise, "condition": self.cond_half},
                                 train=False)
        picks = self.rng.integers(0, self.prepared.samples.shape[0], size=half)
        reals = self.prepared.samples[picks]
        self.disc_batch = np.concatenate([fakes, reals], axis=0)
        self.disc_labels = np.concatenate([np.zeros((half, 1)),
                                           np.ones((half, 1))])

    def _classifier_step(self, net: Network, opt: Adam) -> float:
        net.zero_grads()
        pred = net.forward({"signal": self.disc_batch}, train=True, rng=self.rng)
        loss, grad = bce_loss(pred, self.disc_labels)
        net.backward(grad)
        opt.step()
        return loss

    def disc_step(self) -> tuple[float, float]:
        t_loss = self._classifier_step(self.temporal, self.opt_t)
        f_loss = self._classifier_step(self.frequency, self.opt_f)
        return t_loss, f_loss

    def prepare_generator_phase(self) -> None:
        self.gen_noise = self.rng.standard_normal(
            (self.config.batch_size, self.config.noise_dim))

    def gen_step(self) -> float:
        self.gen.zero_grads()
        fakes = self.gen.forward({"noise": self.gen_noise,
                                  "condition": self.cond_full}, train=True)
        # frozen discriminators run in eval mode: no input noise
        t_pred = self.temporal.forward({"signal": fakes}, train=False)
        f_pred = self.frequency.forward({"signal": fakes}, train=False)
        loss, grad = bce_loss(discriminate(t_pred, f_pred), self.gen_labels)
        self.temporal.zero_grads()
        g_from_t = self.temporal.backward(0.5 * grad)["signal"]
        self.frequency.zero_grads()
        g_from_f = self.frequency.backward(0.5 * grad)["signal"]
        self.gen.backward(g_from_t + g_from_f)
        self.opt_g.step()
        return loss

    def similarity(self) -> float:
        noise = self.rng.standard_normal(
            (self.config.batch_size, self.config.noise_dim))
        fakes = self.gen.forward({"noise": noise, "condition": self.cond_full},
                                 train=False)
        return float(self.similarity_fn(fakes, self.prepared.samples))


# ---------------------------------------------------------------------------
# bundles


@dataclass
class GanBundle:
    """Everything needed to regenerate one (activity, sensor) signal family."""

    activity: str
    sensor: str
    m_frames: int
    noise_dim: int
    generator: Network
    temporal: Network
    frequency: Network
    norm: NormParams
    x_average: np.ndarray
    history: list[EpochRecord] = field(default_factory=list)
    final_similarity: float | None = None
    config: TrainConfig = field(default_factory=TrainConfig)

    def to_model_payload(self) -> tuple[dict, dict[str, np.ndarray]]:
        manifest = {
            "kind": "gan-bundle",
            "activity": self.activity,
            "sensor": self.sensor,
            "m_frames": self.m_frames,
            "noise_dim": self.noise_dim,
            "networks": {
                "generator": self.generator.to_config(),
                "temporal": self.temporal.to_config(),
                "frequency": self.frequency.to_config(),
            },
            "train_config": asdict(self.config),
            "history": [asdict(r) for r in self.history],
            "final_similarity": self.final_similarity,
        }
        arrays = {
            "x_average": self.x_average,
            "norm_min": self.norm.minimum,
            "norm_max": self.norm.maximum,
        }
        for net_name in ("generator", "temporal", "frequency"):
            for pname, tensor in getattr(self, net_name).named_params().items():
                arrays[f"{net_name}/{pname}"] = tensor.values
        return manifest, arrays

    @classmethod
    def from_model_payload(cls, doc: dict,
                           arrays: dict[str, np.ndarray]) -> "GanBundle":
        if doc.get("kind") != "gan-bundle":
            raise ModelFormatError(f"not a gan bundle: kind={doc.get('kind')!r}")
        try:
            nets = {name: Network.from_config(doc["networks"][name])
                    for name in ("generator", "temporal", "frequency")}
            bundle = cls(
                activity=str(doc["activity"]),
                sensor=str(doc["sensor"]),
                m_frames=int(doc["m_frames"]),
                noise_dim=int(doc["noise_dim"]),
                generator=nets["generator"],
                temporal=nets["temporal"],
                frequency=nets["frequency"],
                norm=NormParams(arrays["norm_min"].copy(),
                                arrays["norm_max"].copy()),
                x_average=arrays["x_average"].copy(),
                history=[EpochRecord(**r) for r in doc.get("history", [])],
                final_similarity=doc.get("final_similarity"),
                config=TrainConfig(**doc.get("train_config", {})),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"bundle manifest incomplete: {e}") from None
        if bundle.x_average.shape != (SIGNAL_CHANNELS, bundle.m_frames):
            raise ModelFormatError(
                f"x_average shape {bundle.x_average.shape} does not match "
                f"({SIGNAL_CHANNELS}, {bundle.m_frames})")
        for net_name, net in nets.items():
            for pname, tensor in net.named_params().items():
                key = f"{net_name}/{pname}"
                if key not in arrays:
                    raise ModelFormatError(f"missing weight array {key!r}")
                if arrays[key].shape != tensor.shape:
                    raise ModelFormatError(
                        f"array {key!r}: declared network needs shape "
                        f"{tensor.shape}, blob has {arrays[key].shape}")
                tensor.values = arrays[key].copy()
        return bundle


def train_gan(prepared: PreparedSamples, config: TrainConfig | None = None,
              similarity: Callable[[np.ndarray, np.ndarray], float] | None = None,
              ) -> GanBundle:
    """Train one bundle on prepared samples; reproducible from config.seed.

    `similarity` scores (generated batch, real samples) at each epoch end;
    the default is the perceptual similarity distance with the standard
    frozen extractor.
    """
    config = config if config is not None else TrainConfig()
    if prepared.samples.ndim != 3 or prepared.samples.shape[0] < 2:
        raise ValueError("training needs at least 2 prepared samples")
    if prepared.samples.shape[1] != SIGNAL_CHANNELS:
        raise ValueError(
            f"expected {SIGNAL_CHANNELS}-channel samples, got "
            f"{prepared.samples.shape[1]}")
    if similarity is None:
        extractor = percsim.FeatureExtractor(SIGNAL_CHANNELS)

        def similarity(gen_batch, real_batch):
            return percsim.similarity_distance(gen_batch, real_batch, extractor)

    gen = build_generator(prepared.m_frames, config.noise_dim)
    temporal, frequency = build_discriminator(prepared.m_frames)
    init = derive_rng(config.seed, "init", prepared.simple_id, prepared.sensor)
    gen.init_params(int(init.integers(2 ** 63)))
    temporal.init_params(int(init.integers(2 ** 63)))
    frequency.init_params(int(init.integers(2 ** 63)))

    rng = derive_rng(config.seed, "train", prepared.simple_id, prepared.sensor)
    phases = _NetworkPhases(prepared, config, similarity, rng, gen, temporal,
                            frequency)
    records = run_training_loop(phases, config)
    return GanBundle(
        activity=prepared.simple_id,
        sensor=prepared.sensor,
        m_frames=prepared.m_frames,
        noise_dim=config.noise_dim,
        generator=gen,
        temporal=temporal,
        frequency=frequency,
        norm=prepared.norm,
        x_average=prepared.x_average,
        history=records,
        final_similarity=records[-1].similarity,
        config=config,
    )


# ---------------------------------------------------------------------------
# generation


def generate(bundle: GanBundle, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """n generated samples: (normalized (n,6,M) in (0,1), physical-unit copy)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        empty = np.zeros((0, SIGNAL_CHANNELS, bundle.m_frames))
        return empty, empty.copy()
    rng = derive_rng(seed, "generate", bundle.activity, bundle.sensor)
    noise = rng.standard_normal((n, bundle.noise_dim))
    cond = np.broadcast_to(bundle.x_average, (n,) + bundle.x_average.shape).copy()
    normalized = bundle.generator.forward({"noise": noise, "condition": cond},
                                          train=False)
    physical = np.stack([denormalize(s, bundle.norm) for s in normalized])
    return normalized, physical


def synthesize_complex(complex_id: str, parts: list[str],
                       bundles: dict[tuple[str, str], GanBundle],
                       sensors: list[str], seed: int,
                       blend_frames: int = 0) -> np.ndarray:
    """Generate a complex activity: one simple segment per part, concatenated
    in definition order, sensor streams stacked into 6*len(sensors) channels.

    With blend_frames = b > 0, the first b columns after each junction are
    linearly crossfaded with the held last column of the preceding segment:
    column j of the blend is (1-w)*left + w*right with w = (j+1)/(b+1).
    Total length is unchanged.
    """
    if not parts:
        raise ValueError(f"complex activity {complex_id!r} has no parts")
    if not sensors:
        raise ValueError("need at least one sensor")
    canonical = [s for s in SENSOR_IDS if s in sensors]
    if list(sensors) != canonical or len(set(sensors)) != len(sensors):
        raise ValueError(
            f"sensors must be unique and in canonical order "
            f"{list(SENSOR_IDS)}, got {list(sensors)}")
    missing = [(sid, s) for sid in parts for s in sensors
               if (sid, s) not in bundles]
    if missing:
        raise ValueError(f"missing bundles for {missing}")
    seg_lengths = []
    for sid in parts:
        lengths = {bundles[(sid, s)].m_frames for s in sensors}
        if len(lengths) != 1:
            raise ValueError(
                f"bundles for activity {sid!r} disagree on frame count: "
                f"{sorted(lengths)}")
        seg_lengths.append(lengths.pop())
    if blend_frames < 0:
        raise ValueError("blend_frames must be >= 0")
    if blend_frames > min(seg_lengths):
        raise ValueError(
            f"blend_frames {blend_frames} exceeds the shortest segment "
            f"({min(seg_lengths)} frames)")

    rows = []
    for sensor in sensors:
        segments = []
        for i, sid in enumerate(parts):
            seg_seed = int(derive_rng(seed, "complex", complex_id, sensor,
                                      i).integers(2 ** 63))
            _, physical = generate(bundles[(sid, sensor)], 1, seg_seed)
            segments.append(physical[0])
        rows.append(np.concatenate(segments, axis=1))
    out = np.concatenate(rows, axis=0)
    if blend_frames:
        out = _crossfade(out, np.cumsum(seg_lengths)[:-1], blend_frames)
    return out


def _crossfade(signal: np.ndarray, junctions, width: int) -> np.ndarray:
    original = signal
    out = signal.copy()
    w = (np.arange(width) + 1.0) / (width + 1.0)
    for j0 in junctions:
        left = original[:, j0 - 1][:, None]
        out[:, j0:j0 + width] = (1.0 - w) * left + w * original[:, j0:j0 + width]
    return out
