"""Classifier experiments: does generated data improve activity recognition?

Three classifier families (cnn, lstm, transformer) are trained on windows
cut from complex-activity recordings, with subjects held out for testing.
Each experiment trains a real-only baseline, then retrains with generated
windows added at several ratios of the real window count, and reports
macro-F1 per run plus per-ratio aggregates. The composite layers needed
beyond the core engine (recurrent cells, self-attention, layer norm and
friends) live here and register themselves with the layer registry.

All classifiers consume (batch, channels, length) windows; the recurrent
and attention layers treat the length axis as the time sequence and the
channel axis as the per-step feature vector.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import percsim
from .dataio import Dataset, stacked_channels
from .diffnet import (Adam, AvgPool, Concat, Conv1d, Dense, Flatten, Layer,
                      MaxPool, Network, Relu, ShapeError,
                      conv_out_len, cross_entropy_loss, register_layer)
from .gan import synthesize_complex
from .preprocess import NormParams, fit_norm, normalize, window_signal
from .seeds import derive_rng

CLASSIFIER_FAMILIES = ("cnn", "lstm", "transformer")


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# harness-local layers


@register_layer
class Lstm(Layer):
    """One recurrent layer with input/forget/cell/output gates, full BPTT.

    Input (B, C, L) is read as L steps of C features; output is the full
    hidden-state sequence (B, H, L) so layers stack. The forget-gate bias
    initializes to 1 to keep early memory open.
    """

    kind = "lstm"

    def __init__(self, in_features: int, hidden: int):
        super().__init__()
        self.in_features = in_features
        self.hidden = hidden
        self._init_tensor("w", np.zeros((4 * hidden, in_features + hidden)))
        self._init_tensor("b", np.zeros(4 * hidden))

    def init_params(self, rng):
        h = self.hidden
        scale = math.sqrt(1.0 / (self.in_features + h))
        self._init_tensor("w", rng.standard_normal(
            (4 * h, self.in_features + h)) * scale)
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0  # forget gate starts open
        self._init_tensor("b", b)

    def forward(self, xs, *, train, rng):
        (x,) = xs
        if x.ndim != 3 or x.shape[1] != self.in_features:
            raise ShapeError(
                f"lstm expects (batch, {self.in_features}, length), got {x.shape}")
        w = self.params["w"].values
        b = self.params["b"].values
        batch, _, length = x.shape
        h_dim = self.hidden
        h = np.zeros((batch, h_dim))
        c = np.zeros((batch, h_dim))
        out = np.empty((batch, h_dim, length))
        steps = []
        for t in range(length):
            zin = np.concatenate([x[:, :, t], h], axis=1)
            z = zin @ w.T + b
            gi = _stable_sigmoid(z[:, :h_dim])
            gf = _stable_sigmoid(z[:, h_dim:2 * h_dim])
            gg = np.tanh(z[:, 2 * h_dim:3 * h_dim])
            go = _stable_sigmoid(z[:, 3 * h_dim:])
            c_new = gf * c + gi * gg
            tc = np.tanh(c_new)
            h = go * tc
            steps.append((zin, gi, gf, gg, go, c, tc))
            c = c_new
            out[:, :, t] = h
        self._cache = (x.shape, steps)
        return out

    def backward(self, gy):
        in_shape, steps = self._cache
        w = self.params["w"].values
        h_dim = self.hidden
        gw = np.zeros_like(w)
        gb = np.zeros(4 * h_dim)
        gx = np.zeros(in_shape)
        gh = np.zeros((in_shape[0], h_dim))
        gc = np.zeros((in_shape[0], h_dim))
        for t in range(in_shape[2] - 1, -1, -1):
            zin, gi, gf, gg, go, c_prev, tc = steps[t]
            gh_total = gy[:, :, t] + gh
            d_go = gh_total * tc
            gc_total = gc + gh_total * go * (1.0 - tc ** 2)
            d_gi = gc_total * gg
            d_gf = gc_total * c_prev
            d_gg = gc_total * gi
            gc = gc_total * gf
            dz = np.concatenate([
                d_gi * gi * (1.0 - gi),
                d_gf * gf * (1.0 - gf),
                d_gg * (1.0 - gg ** 2),
                d_go * go * (1.0 - go),
            ], axis=1)
            gw += dz.T @ zin
            gb += dz.sum(axis=0)
            gzin = dz @ w
            gx[:, :, t] = gzin[:, :self.in_features]
            gh = gzin[:, self.in_features:]
        self.params["w"].add_grad(gw)
        self.params["b"].add_grad(gb)
        return [gx]

    def config(self):
        return {"in_features": self.in_features, "hidden": self.hidden}


@register_layer
class SelfAttention(Layer):
    """Multi-head self-attention over the time axis of a (B, D, L) tensor."""

    kind = "self_attention"

    def __init__(self, width: int, heads: int):
        super().__init__()
        if width % heads:
            raise ValueError(f"width {width} not divisible by {heads} heads")
        self.width = width
        self.heads = heads
        for name in ("wq", "wk", "wv", "wo"):
            self._init_tensor(name, np.zeros((width, width)))

    def init_params(self, rng):
        scale = math.sqrt(1.0 / self.width)
        for name in ("wq", "wk", "wv", "wo"):
            self._init_tensor(name, rng.standard_normal(
                (self.width, self.width)) * scale)

    def _split(self, m: np.ndarray) -> np.ndarray:
        b, l, _ = m.shape
        return m.reshape(b, l, self.heads, -1).transpose(0, 2, 1, 3)

    def _merge(self, m: np.ndarray) -> np.ndarray:
        b, _, l, _ = m.shape
        return m.transpose(0, 2, 1, 3).reshape(b, l, self.width)

    def forward(self, xs, *, train, rng):
        (x,) = xs
        if x.ndim != 3 or x.shape[1] != self.width:
            raise ShapeError(
                f"self_attention expects (batch, {self.width}, length), got {x.shape}")
        p = {k: self.params[k].values for k in ("wq", "wk", "wv", "wo")}
        xt = x.transpose(0, 2, 1)  # (B, L, D)
        q = self._split(xt @ p["wq"].T)
        k = self._split(xt @ p["wk"].T)
        v = self._split(xt @ p["wv"].T)
        scale = 1.0 / math.sqrt(self.width // self.heads)
        scores = q @ k.transpose(0, 1, 3, 2) * scale
        scores -= scores.max(axis=-1, keepdims=True)
        attn = np.exp(scores)
        attn /= attn.sum(axis=-1, keepdims=True)
        ctx = self._merge(attn @ v)  # (B, L, D)
        y = ctx @ p["wo"].T
        self._cache = (xt, q, k, v, attn, ctx, scale)
        return y.transpose(0, 2, 1)

    def backward(self, gy):
        xt, q, k, v, attn, ctx, scale = self._cache
        p = {n: self.params[n].values for n in ("wq", "wk", "wv", "wo")}
        g_y = gy.transpose(0, 2, 1)  # (B, L, D)
        self.params["wo"].add_grad(np.tensordot(g_y, ctx, axes=([0, 1], [0, 1])))
        g_ctx = self._split(g_y @ p["wo"])
        g_attn = g_ctx @ v.transpose(0, 1, 3, 2)
        g_v = attn.transpose(0, 1, 3, 2) @ g_ctx
        g_scores = attn * (g_attn - (g_attn * attn).sum(axis=-1, keepdims=True))
        g_q = g_scores @ k * scale
        g_k = g_scores.transpose(0, 1, 3, 2) @ q * scale
        gx_t = np.zeros_like(xt)
        for name, grad in (("wq", g_q), ("wk", g_k), ("wv", g_v)):
            merged = self._merge(grad)
            self.params[name].add_grad(
                np.tensordot(merged, xt, axes=([0, 1], [0, 1])))
            gx_t += merged @ p[name]
        return [gx_t.transpose(0, 2, 1)]

    def config(self):
        return {"width": self.width, "heads": self.heads}


@register_layer
class LayerNorm(Layer):
    """Normalize each time step over the channel axis, with gain and bias."""

    kind = "layer_norm"
    EPS = 1e-5

    def __init__(self, width: int):
        super().__init__()
        self.width = width
        self._init_tensor("gain", np.ones(width))
        self._init_tensor("bias", np.zeros(width))

    def init_params(self, rng):
        self._init_tensor("gain", np.ones(self.width))
        self._init_tensor("bias", np.zeros(self.width))

    def forward(self, xs, *, train, rng):
        (x,) = xs
        if x.ndim != 3 or x.shape[1] != self.width:
            raise ShapeError(
                f"layer_norm expects (batch, {self.width}, length), got {x.shape}")
        mu = x.mean(axis=1, keepdims=True)
        var = x.var(axis=1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.EPS)
        xhat = (x - mu) * inv
        self._cache = (xhat, inv)
        return self.params["gain"].values[:, None] * xhat \
            + self.params["bias"].values[:, None]

    def backward(self, gy):
        xhat, inv = self._cache
        gain = self.params["gain"].values
        self.params["gain"].add_grad((gy * xhat).sum(axis=(0, 2)))
        self.params["bias"].add_grad(gy.sum(axis=(0, 2)))
        gxhat = gy * gain[:, None]
        n = xhat.shape[1]
        gx = (inv / n) * (n * gxhat
                          - gxhat.sum(axis=1, keepdims=True)
                          - xhat * (gxhat * xhat).sum(axis=1, keepdims=True))
        return [gx]

    def config(self):
        return {"width": self.width}


@register_layer
class PositionalEncoding(Layer):
    """Additive sinusoidal position code over the time axis."""

    kind = "pos_enc"

    def __init__(self, width: int):
        super().__init__()
        self.width = width

    def _table(self, length: int) -> np.ndarray:
        pos = np.arange(length)[None, :]
        idx = np.arange(0, self.width, 2)[:, None]
        angle = pos / np.power(10000.0, idx / self.width)
        table = np.zeros((self.width, length))
        table[0::2] = np.sin(angle)
        table[1::2] = np.cos(angle)[: self.width // 2]
        return table

    def forward(self, xs, *, train, rng):
        (x,) = xs
        if x.ndim != 3 or x.shape[1] != self.width:
            raise ShapeError(
                f"pos_enc expects (batch, {self.width}, length), got {x.shape}")
        return x + self._table(x.shape[2])[None]

    def backward(self, gy):
        return [gy]

    def config(self):
        return {"width": self.width}


@register_layer
class Add(Layer):
    """Elementwise sum of two equally shaped inputs (residual connections)."""

    kind = "add"
    n_inputs = 2

    def forward(self, xs, *, train, rng):
        a, b = xs
        if a.shape != b.shape:
            raise ShapeError(f"add inputs disagree: {a.shape} vs {b.shape}")
        return a + b

    def backward(self, gy):
        return [gy, gy.copy()]


@register_layer
class TakeLast(Layer):
    """Keep the final time step: (B, C, L) -> (B, C)."""

    kind = "take_last"

    def forward(self, xs, *, train, rng):
        (x,) = xs
        if x.ndim != 3:
            raise ShapeError(f"take_last expects (batch, channels, length), got {x.shape}")
        self._cache = x.shape
        return x[:, :, -1]

    def backward(self, gy):
        gx = np.zeros(self._cache)
        gx[:, :, -1] = gy
        return [gx]


@register_layer
class Softmax(Layer):
    """Row-wise softmax over (B, K) scores."""

    kind = "softmax"

    def forward(self, xs, *, train, rng):
        (x,) = xs
        if x.ndim != 2:
            raise ShapeError(f"softmax expects (batch, classes), got {x.shape}")
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=1, keepdims=True)
        self._cache = y
        return y

    def backward(self, gy):
        y = self._cache
        return [y * (gy - (gy * y).sum(axis=1, keepdims=True))]


# ---------------------------------------------------------------------------
# classifiers


def build_classifier(family: str, n_classes: int, channels: int = 24,
                     length: int = 450) -> Network:
    """A window classifier ending in a softmax over complex-activity classes."""
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if family not in CLASSIFIER_FAMILIES:
        raise ValueError(
            f"unknown family {family!r}; choose from {CLASSIFIER_FAMILIES}")
    net = Network(["windows"])
    if family == "cnn":
        for k in (3, 5, 9):
            net.add(f"branch_k{k}", Conv1d(channels, 8, k, stride=2,
                                           pad=(k - 1) // 2), "windows")
        net.add("inception", Concat(), ["branch_k3", "branch_k5", "branch_k9"])
        net.add("act0", Relu(), "inception")
        l1 = conv_out_len(length, 3, 2, 1)
        net.add("conv1", Conv1d(24, 32, 3, stride=2, pad=1), "act0")
        net.add("act1", Relu(), "conv1")
        l2 = conv_out_len(l1, 3, 2, 1)
        net.add("pool", MaxPool(2, 2), "act1")
        l3 = conv_out_len(l2, 2, 2, 0)
        net.add("flat", Flatten(), "pool")
        net.add("fc0", Dense(32 * l3, 64), "flat")
        net.add("fc0_act", Relu(), "fc0")
        net.add("logits", Dense(64, n_classes), "fc0_act")
    elif family == "lstm":
        src = "windows"
        width = channels
        for i in range(3):
            src = net.add(f"lstm{i}", Lstm(width, 32), src)
            width = 32
        net.add("last", TakeLast(), src)
        net.add("logits", Dense(32, n_classes), "last")
    else:  # transformer
        net.add("proj", Conv1d(channels, 32, 1), "windows")
        net.add("pos", PositionalEncoding(32), "proj")
        net.add("attn", SelfAttention(32, 4), "pos")
        net.add("res0", Add(), ["pos", "attn"])
        net.add("ln0", LayerNorm(32), "res0")
        net.add("ffn0", Conv1d(32, 64, 1), "ln0")
        net.add("ffn_act", Relu(), "ffn0")
        net.add("ffn1", Conv1d(64, 32, 1), "ffn_act")
        net.add("res1", Add(), ["ln0", "ffn1"])
        net.add("ln1", LayerNorm(32), "res1")
        net.add("time_pool", AvgPool(length, length), "ln1")
        net.add("flat", Flatten(), "time_pool")
        net.add("logits", Dense(32, n_classes), "flat")
    net.add("probs", Softmax(), "logits")
    return net


def f1_macro(confusion: np.ndarray) -> float:
    """Unweighted mean per-class F1 from a (true, predicted) count matrix.

    Per-class F1 is 2*TP / (2*TP + FP + FN), defined as 0 when the
    denominator is 0 (no instances and no predictions for the class).
    """
    c = np.asarray(confusion, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {c.shape}")
    scores = []
    for k in range(c.shape[0]):
        tp = c[k, k]
        fp = c[:, k].sum() - tp
        fn = c[k, :].sum() - tp
        denom = 2.0 * tp + fp + fn
        scores.append(0.0 if denom == 0.0 else 2.0 * tp / denom)
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# experiment protocol


@dataclass
class ExperimentPlan:
    """What to run: families x ratios x runs on subject-held-out splits.

    `subsample` maps complex-activity ids to the fraction of their real
    training windows to keep, for deliberately imbalanced experiments.
    Generated windows are cut from synthesized complex activities and
    spread uniformly over the classes.
    """
    families: list[str] = field(default_factory=lambda: ["cnn", "lstm", "transformer"])
    ratios: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0])
    n_runs: int = 10
    held_out_subjects: list[str] | None = None
    held_out_count: int = 1
    window: int = 450
    stride: int = 225
    train_epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    blend_frames: int = 0
    subsample: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if not self.families:
            raise ValueError("plan needs at least one classifier family")
        for fam in self.families:
            if fam not in CLASSIFIER_FAMILIES:
                raise ValueError(f"unknown classifier family {fam!r}")
        if not any(r == 0 for r in self.ratios):
            raise ValueError("ratios must include 0 (the real-only baseline)")
        if any(r < 0 for r in self.ratios):
            raise ValueError("ratios must be >= 0")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.window < 1 or self.stride < 1:
            raise ValueError("window and stride must be >= 1")
        if self.train_epochs < 1 or self.batch_size < 1:
            raise ValueError("train_epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.held_out_count < 1:
            raise ValueError("held_out_count must be >= 1")
        for cid, frac in self.subsample.items():
            if not (0.0 < frac <= 1.0):
                raise ValueError(
                    f"subsample fraction for {cid!r} must be in (0, 1], got {frac}")


@dataclass
class EvalRow:
    family: str
    ratio: float
    run: int
    f1: float


@dataclass
class EvalReport:
    rows: list[EvalRow]
    meta: dict = field(default_factory=dict)

    def summary(self) -> list[dict]:
        """Per (family, ratio): mean/std F1 plus absolute and relative gain
        over that family's ratio-0 baseline."""
        out = []
        families = sorted({r.family for r in self.rows})
        for family in families:
            fam_rows = [r for r in self.rows if r.family == family]
            ratios = sorted({r.ratio for r in fam_rows})
            base_scores = [r.f1 for r in fam_rows if r.ratio == 0]
            base = float(np.mean(base_scores)) if base_scores else float("nan")
            for ratio in ratios:
                scores = [r.f1 for r in fam_rows if r.ratio == ratio]
                mean = float(np.mean(scores))
                out.append({
                    "family": family,
                    "ratio": ratio,
                    "n": len(scores),
                    "mean_f1": mean,
                    "std_f1": float(np.std(scores)),
                    "gain_abs": mean - base,
                    "gain_rel": (mean - base) / base if base > 0 else float("nan"),
                })
        return out


def _split_subjects(subjects: list[str], plan: ExperimentPlan,
                    run: int) -> tuple[list[str], list[str]]:
    if plan.held_out_subjects is not None:
        held = list(plan.held_out_subjects)
        unknown = [s for s in held if s not in subjects]
        if unknown:
            raise ValueError(f"held-out subjects not in dataset: {unknown}")
    else:
        if plan.held_out_count >= len(subjects):
            raise ValueError(
                f"cannot hold out {plan.held_out_count} of {len(subjects)} subjects")
        rng = derive_rng(plan.seed, "split", run)
        held = sorted(rng.choice(subjects, size=plan.held_out_count,
                                 replace=False).tolist())
    train = [s for s in subjects if s not in held]
    if not train or not held:
        raise ValueError("too few subjects to split into train and held-out sets")
    return train, held


def _window_dataset(dataset: Dataset, plan: ExperimentPlan,
                    class_index: dict[str, int]):
    """(subject, label, windows) per recording, with empty recordings dropped."""
    sensors = dataset.manifest.sensors
    items = []
    for rec in dataset.iter_recordings():
        wins = window_signal(stacked_channels(rec, sensors), plan.window,
                             plan.stride)
        if wins.shape[0]:
            items.append((rec.subject_id, class_index[rec.complex_id], wins))
    return items


def _generated_windows(dataset: Dataset, bundles: dict, plan: ExperimentPlan,
                       class_ids: list[str], n_gen: int, run: int,
                       norm: NormParams) -> tuple[np.ndarray, np.ndarray]:
    sensors = dataset.manifest.sensors
    quota = {cid: n_gen // len(class_ids) for cid in class_ids}
    for cid in class_ids[:n_gen % len(class_ids)]:
        quota[cid] += 1
    xs, ys = [], []
    for cid in class_ids:
        parts = dataset.manifest.complex_activities[cid]
        harvested = 0
        attempt = 0
        while harvested < quota[cid]:
            seed = int(derive_rng(plan.seed, "gen", run, cid,
                                  attempt).integers(2 ** 63))
            attempt += 1
            signal = synthesize_complex(cid, parts, bundles, sensors, seed,
                                        plan.blend_frames)
            wins = window_signal(signal, plan.window, plan.stride)
            if wins.shape[0] == 0:
                raise ValueError(
                    f"synthesized {cid!r} is shorter ({signal.shape[1]} frames) "
                    f"than the window ({plan.window})")
            take = min(wins.shape[0], quota[cid] - harvested)
            xs.append(wins[:take])
            ys.extend([class_index_of(class_ids, cid)] * take)
            harvested += take
    if not xs:
        return (np.zeros((0, 6 * len(sensors), plan.window)),
                np.zeros(0, dtype=int))
    stacked = np.concatenate(xs, axis=0)
    stacked = np.stack([normalize(w, norm) for w in stacked])
    return stacked, np.asarray(ys, dtype=int)


def class_index_of(class_ids: list[str], cid: str) -> int:
    return class_ids.index(cid)


def _train_classifier(net: Network, windows: np.ndarray, labels: np.ndarray,
                      plan: ExperimentPlan, rng: np.random.Generator) -> None:
    opt = Adam(net.named_params(), plan.learning_rate)
    n = windows.shape[0]
    for _ in range(plan.train_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, plan.batch_size):
            idx = perm[start:start + plan.batch_size]
            net.zero_grads()
            probs = net.forward({"windows": windows[idx]}, train=True, rng=rng)
            _, grad = cross_entropy_loss(probs, labels[idx])
            net.backward(grad)
            opt.step()


def _confusion(net: Network, windows: np.ndarray, labels: np.ndarray,
               n_classes: int, batch_size: int) -> np.ndarray:
    conf = np.zeros((n_classes, n_classes), dtype=int)
    for start in range(0, windows.shape[0], batch_size):
        chunk = windows[start:start + batch_size]
        probs = net.forward({"windows": chunk}, train=False)
        preds = probs.argmax(axis=1)
        np.add.at(conf, (labels[start:start + batch_size], preds), 1)
    return conf


def run_experiment(dataset: Dataset, bundles: dict, plan: ExperimentPlan,
                   log_fn=None) -> EvalReport:
    """The full protocol; reproducible from plan.seed.

    Classifier initialization and batch ordering are seeded per
    (family, run) and identical across ratios, so added generated windows
    are the only difference between a baseline row and its nonzero-ratio
    rows.
    """
    class_ids = sorted(dataset.manifest.complex_activities)
    if len(class_ids) < 2:
        raise ValueError("experiments need at least 2 complex-activity classes")
    class_index = {cid: i for i, cid in enumerate(class_ids)}
    sensors = dataset.manifest.sensors
    needed = {(sid, sensor)
              for cid in class_ids
              for sid in dataset.manifest.complex_activities[cid]
              for sensor in sensors}
    missing = sorted(pair for pair in needed if pair not in bundles)
    if missing:
        raise ValueError(f"missing bundles for {missing}")

    items = _window_dataset(dataset, plan, class_index)
    if not items:
        raise ValueError(
            f"no recording yields a single {plan.window}-frame window")
    subjects = sorted({subject for subject, _, _ in items})
    channels = 6 * len(sensors)
    rows: list[EvalRow] = []

    for run in range(plan.n_runs):
        train_subjects, held = _split_subjects(subjects, plan, run)
        x_train = [w for s, _, wins in items if s in train_subjects for w in wins]
        y_train = [lab for s, lab, wins in items if s in train_subjects
                   for _ in range(wins.shape[0])]
        x_test = [w for s, _, wins in items if s in held for w in wins]
        y_test = [lab for s, lab, wins in items if s in held
                  for _ in range(wins.shape[0])]
        if not x_train or not x_test:
            raise ValueError(
                f"run {run}: empty training or test window set after the split")
        x_train = np.stack(x_train)
        y_train = np.asarray(y_train, dtype=int)
        x_test = np.stack(x_test)
        y_test = np.asarray(y_test, dtype=int)

        if plan.subsample:
            keep = np.ones(x_train.shape[0], dtype=bool)
            sub_rng = derive_rng(plan.seed, "subsample", run)
            for cid, frac in sorted(plan.subsample.items()):
                idx = np.flatnonzero(y_train == class_index[cid])
                if idx.size == 0:
                    continue
                n_keep = max(1, int(round(frac * idx.size)))
                chosen = sub_rng.choice(idx, size=n_keep, replace=False)
                keep[idx] = False
                keep[chosen] = True
            x_train = x_train[keep]
            y_train = y_train[keep]

        norm = fit_norm(list(x_train))
        x_train = np.stack([normalize(w, norm) for w in x_train])
        x_test = np.stack([normalize(w, norm) for w in x_test])
        n_real = x_train.shape[0]

        for family in plan.families:
            init_seed = int(derive_rng(plan.seed, "clf-init", family,
                                       run).integers(2 ** 63))
            for ratio in plan.ratios:
                if ratio == 0:
                    x_all, y_all = x_train, y_train
                else:
                    n_gen = math.ceil(ratio * n_real)
                    x_gen, y_gen = _generated_windows(
                        dataset, bundles, plan, class_ids, n_gen, run, norm)
                    x_all = np.concatenate([x_train, x_gen], axis=0)
                    y_all = np.concatenate([y_train, y_gen])
                net = build_classifier(family, len(class_ids), channels,
                                       plan.window)
                net.init_params(init_seed)
                rng = derive_rng(plan.seed, "clf-train", family, run)
                _train_classifier(net, x_all, y_all, plan, rng)
                conf = _confusion(net, x_test, y_test, len(class_ids),
                                  plan.batch_size)
                score = f1_macro(conf)
                rows.append(EvalRow(family, float(ratio), run, score))
                if log_fn is not None:
                    log_fn({"event": "eval-point", "family": family,
                            "ratio": float(ratio), "run": run, "f1": score,
                            "train_windows": int(x_all.shape[0]),
                            "test_windows": int(x_test.shape[0])})
    meta = {"plan": asdict(plan), "classes": class_ids,
            "subjects": subjects, "feature_seed": percsim.FEATURE_SEED}
    return EvalReport(rows=rows, meta=meta)


# ---------------------------------------------------------------------------
# report output


def emit_report(report: EvalReport, out_dir: str | Path) -> tuple[Path, Path]:
    """Write report.csv (family,ratio,run,f1) and a self-contained SVG plot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "report.csv"
    lines = ["family,ratio,run,f1"]
    for r in report.rows:
        lines.append(f"{r.family},{r.ratio:.9g},{r.run},{r.f1:.9g}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    svg_path = out / "report.svg"
    svg_path.write_text(render_report_svg(report), encoding="utf-8")
    return csv_path, svg_path


def import_report_csv(path: str | Path) -> EvalReport:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0] != "family,ratio,run,f1":
        raise ValueError(f"{path}: not a report CSV")
    rows = []
    for line in lines[1:]:
        family, ratio, run, f1 = line.split(",")
        rows.append(EvalRow(family, float(ratio), int(run), float(f1)))
    return EvalReport(rows=rows)


_PALETTE = {"cnn": "#1f77b4", "lstm": "#d62728", "transformer": "#2ca02c"}


def render_report_svg(report: EvalReport, width: int = 640,
                      height: int = 420) -> str:
    """Macro-F1 vs ratio: per-run points plus a mean line per family.

    Hand-assembled SVG so identical reports render byte-identically.
    """
    x0, y0, x1, y1 = 62.0, 28.0, width - 170.0, height - 48.0
    ratios = sorted({r.ratio for r in report.rows})
    families = sorted({r.family for r in report.rows})

    def fmt(v: float) -> str:
        return f"{v:.6g}"

    def sx(ratio: float) -> float:
        if len(ratios) < 2 or ratios[-1] == ratios[0]:
            return (x0 + x1) / 2.0
        return x0 + (x1 - x0) * (ratio - ratios[0]) / (ratios[-1] - ratios[0])

    def sy(f1: float) -> float:
        return y1 - (y1 - y0) * min(max(f1, 0.0), 1.0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{fmt((x0 + x1) / 2)}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">macro-F1 vs augmentation '
        f'ratio</text>',
        f'<line x1="{fmt(x0)}" y1="{fmt(y1)}" x2="{fmt(x1)}" y2="{fmt(y1)}" '
        f'stroke="black" stroke-width="1"/>',
        f'<line x1="{fmt(x0)}" y1="{fmt(y0)}" x2="{fmt(x0)}" y2="{fmt(y1)}" '
        f'stroke="black" stroke-width="1"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        ty = sy(tick)
        parts.append(f'<line x1="{fmt(x0 - 4)}" y1="{fmt(ty)}" x2="{fmt(x0)}" '
                     f'y2="{fmt(ty)}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{fmt(x0 - 8)}" y="{fmt(ty + 4)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{fmt(tick)}</text>')
    for ratio in ratios:
        tx = sx(ratio)
        parts.append(f'<line x1="{fmt(tx)}" y1="{fmt(y1)}" x2="{fmt(tx)}" '
                     f'y2="{fmt(y1 + 4)}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{fmt(tx)}" y="{fmt(y1 + 18)}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{fmt(ratio)}</text>')
    parts.append(f'<text x="{fmt((x0 + x1) / 2)}" y="{fmt(y1 + 36)}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">generated-to-real ratio</text>')
    parts.append(f'<text x="16" y="{fmt((y0 + y1) / 2)}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {fmt((y0 + y1) / 2)})">macro-F1'
                 f'</text>')

    for fi, family in enumerate(families):
        color = _PALETTE.get(family, "#7f7f7f")
        fam_rows = [r for r in report.rows if r.family == family]
        for r in fam_rows:
            parts.append(f'<circle cx="{fmt(sx(r.ratio))}" cy="{fmt(sy(r.f1))}" '
                         f'r="3" fill="{color}" fill-opacity="0.4"/>')
        means = []
        for ratio in ratios:
            scores = [r.f1 for r in fam_rows if r.ratio == ratio]
            if scores:
                means.append((ratio, float(np.mean(scores))))
        if means:
            points = " ".join(f"{fmt(sx(rat))},{fmt(sy(m))}" for rat, m in means)
            parts.append(f'<polyline points="{points}" fill="none" '
                         f'stroke="{color}" stroke-width="2"/>')
        ly = y0 + 16 + 20 * fi
        parts.append(f'<line x1="{fmt(x1 + 14)}" y1="{fmt(ly - 4)}" '
                     f'x2="{fmt(x1 + 38)}" y2="{fmt(ly - 4)}" stroke="{color}" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{fmt(x1 + 44)}" y="{fmt(ly)}" '
                     f'font-family="sans-serif" font-size="12">{family}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
