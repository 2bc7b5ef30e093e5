"""Layer kinds for the network engine.

Each layer implements a forward pass over batched float64 arrays, a
matching reverse-mode backward pass (gradients for inputs and for any
trainable parameters), and hyperparameter (de)serialization.  Signal
tensors are (batch, channels, length); dense activations are
(batch, features).

Shape formulas:
    conv1d / sepconv1d / pools:  L_out = floor((L + 2*pad - k) / stride) + 1
    tconv1d:                     L_out = (L - 1) * stride - 2*pad + k
    dft_magnitude:               L_out = floor(L / 2) + 1
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import Tensor, quantize_f32

DFT_EPS = 1e-12


class ShapeError(ValueError):
    """An input does not satisfy a layer's shape contract."""


def conv_out_len(length: int, kernel: int, stride: int, pad: int) -> int:
    out = (length + 2 * pad - kernel) // stride + 1
    if out < 1:
        raise ShapeError(
            f"length {length} too short for kernel {kernel}, stride {stride}, pad {pad}"
        )
    return out


def tconv_out_len(length: int, kernel: int, stride: int, pad: int) -> int:
    out = (length - 1) * stride - 2 * pad + kernel
    if out < 1:
        raise ShapeError(
            f"length {length} too short for transposed kernel {kernel}, "
            f"stride {stride}, pad {pad}"
        )
    return out


def _check_signal(x: np.ndarray, who: str) -> None:
    if x.ndim != 3:
        raise ShapeError(f"{who} expects a (batch, channels, length) array, got shape {x.shape}")


def _check_channels(x: np.ndarray, expected: int, who: str) -> None:
    _check_signal(x, who)
    if x.shape[1] != expected:
        raise ShapeError(f"{who} expects {expected} channels, got {x.shape[1]}")


class Layer:
    """Base class: a differentiable operation with optional parameters."""

    kind = "base"
    n_inputs = 1

    def __init__(self) -> None:
        self.params: dict[str, Tensor] = {}

    def init_params(self, rng: np.random.Generator) -> None:
        """Draw fresh parameters.  Values are rounded through float32 so
        that a freshly built model serializes bit-exactly."""

    def forward(self, xs: list[np.ndarray], *, train: bool, rng) -> np.ndarray:
        raise NotImplementedError

    def backward(self, gy: np.ndarray) -> list[np.ndarray]:
        """Return gradients w.r.t. each input; accumulate parameter grads."""
        raise NotImplementedError

    def config(self) -> dict:
        return {}

    def _init_tensor(self, name: str, values: np.ndarray) -> Tensor:
        t = Tensor(quantize_f32(values))
        self.params[name] = t
        return t


# ---------------------------------------------------------------------------
# convolutions


class Conv1d(Layer):
    """Cross-correlation along the time axis, with bias."""

    kind = "conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 stride: int = 1, pad: int = 0):
        super().__init__()
        if kernel < 1 or stride < 1 or pad < 0:
            raise ValueError("kernel and stride must be >= 1, pad >= 0")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self._init_tensor("w", np.zeros((out_channels, in_channels, kernel)))
        self._init_tensor("b", np.zeros(out_channels))

    def init_params(self, rng):
        fan_in = self.in_channels * self.kernel
        self._init_tensor("w", rng.standard_normal(
            (self.out_channels, self.in_channels, self.kernel)) * math.sqrt(2.0 / fan_in))
        self._init_tensor("b", np.zeros(self.out_channels))

    def forward(self, xs, *, train, rng):
        (x,) = xs
        _check_channels(x, self.in_channels, self.kind)
        w = self.params["w"].values
        b = self.params["b"].values
        s, p, k = self.stride, self.pad, self.kernel
        l_out = conv_out_len(x.shape[2], k, s, p)
        xp = np.pad(x, ((0, 0), (0, 0), (p, p))) if p else x
        # gather every kernel placement up front so the whole layer is one GEMM
        seg = np.stack([xp[:, :, j:j + s * l_out:s] for j in range(k)], axis=2)
        y = np.tensordot(seg, w, axes=([1, 2], [1, 2])).transpose(0, 2, 1)
        y = y + b[:, None]
        self._cache = (seg, xp.shape, x.shape[2], l_out)
        return y

    def backward(self, gy):
        seg, xp_shape, l_in, l_out = self._cache
        w = self.params["w"].values
        s, p, k = self.stride, self.pad, self.kernel
        self.params["w"].add_grad(np.tensordot(gy, seg, axes=([0, 2], [0, 3])))
        self.params["b"].add_grad(gy.sum(axis=(0, 2)))
        gseg = np.tensordot(gy, w, axes=([1], [0]))  # (batch, l_out, Ci, K)
        gxp = np.zeros(xp_shape)
        for j in range(k):
            gxp[:, :, j:j + s * l_out:s] += gseg[:, :, :, j].transpose(0, 2, 1)
        gx = gxp[:, :, p:p + l_in] if p else gxp
        return [gx]

    def config(self):
        return {"in_channels": self.in_channels, "out_channels": self.out_channels,
                "kernel": self.kernel, "stride": self.stride, "pad": self.pad}


class TConv1d(Layer):
    """Transposed convolution: the adjoint of Conv1d with the same
    kernel/stride/pad, used for upsampling.  Weight layout is
    (in_channels, out_channels, kernel)."""

    kind = "tconv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 stride: int = 1, pad: int = 0):
        super().__init__()
        if kernel < 1 or stride < 1 or pad < 0:
            raise ValueError("kernel and stride must be >= 1, pad >= 0")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self._init_tensor("w", np.zeros((in_channels, out_channels, kernel)))
        self._init_tensor("b", np.zeros(out_channels))

    def init_params(self, rng):
        fan_in = self.in_channels * self.kernel
        self._init_tensor("w", rng.standard_normal(
            (self.in_channels, self.out_channels, self.kernel)) * math.sqrt(2.0 / fan_in))
        self._init_tensor("b", np.zeros(self.out_channels))

    def forward(self, xs, *, train, rng):
        (x,) = xs
        _check_channels(x, self.in_channels, self.kind)
        w = self.params["w"].values
        b = self.params["b"].values
        s, p, k = self.stride, self.pad, self.kernel
        l_in = x.shape[2]
        l_out = tconv_out_len(l_in, k, s, p)
        l_full = (l_in - 1) * s + k
        u = np.tensordot(x, w, axes=([1], [0]))  # (batch, l_in, Co, K)
        vfull = np.zeros((x.shape[0], self.out_channels, l_full))
        for j in range(k):
            vfull[:, :, j:j + s * l_in:s] += u[:, :, :, j].transpose(0, 2, 1)
        y = vfull[:, :, p:p + l_out] + b[:, None]
        self._cache = (x, l_full, l_out)
        return y

    def backward(self, gy):
        x, l_full, l_out = self._cache
        w = self.params["w"].values
        s, p, k = self.stride, self.pad, self.kernel
        l_in = x.shape[2]
        gfull = np.zeros((gy.shape[0], self.out_channels, l_full))
        gfull[:, :, p:p + l_out] = gy
        seg = np.stack([gfull[:, :, j:j + s * l_in:s] for j in range(k)], axis=3)
        self.params["w"].add_grad(
            np.tensordot(x, seg, axes=([0, 2], [0, 2])))
        self.params["b"].add_grad(gy.sum(axis=(0, 2)))
        gx = np.tensordot(seg, w, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
        return [gx]

    def config(self):
        return {"in_channels": self.in_channels, "out_channels": self.out_channels,
                "kernel": self.kernel, "stride": self.stride, "pad": self.pad}


class SepConv1d(Layer):
    """Separable convolution: a per-channel (depthwise) kernel followed by
    a pointwise 1x1 channel mix."""

    kind = "sepconv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 stride: int = 1, pad: int = 0):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self._init_tensor("dw", np.zeros((in_channels, kernel)))
        self._init_tensor("pw", np.zeros((out_channels, in_channels)))
        self._init_tensor("b", np.zeros(out_channels))

    def init_params(self, rng):
        self._init_tensor("dw", rng.standard_normal(
            (self.in_channels, self.kernel)) * math.sqrt(2.0 / self.kernel))
        self._init_tensor("pw", rng.standard_normal(
            (self.out_channels, self.in_channels)) * math.sqrt(2.0 / self.in_channels))
        self._init_tensor("b", np.zeros(self.out_channels))

    def forward(self, xs, *, train, rng):
        (x,) = xs
        _check_channels(x, self.in_channels, self.kind)
        dw = self.params["dw"].values
        pw = self.params["pw"].values
        b = self.params["b"].values
        s, p, k = self.stride, self.pad, self.kernel
        l_out = conv_out_len(x.shape[2], k, s, p)
        xp = np.pad(x, ((0, 0), (0, 0), (p, p))) if p else x
        mid = np.zeros((x.shape[0], self.in_channels, l_out))
        for j in range(k):
            mid += dw[None, :, j, None] * xp[:, :, j:j + s * l_out:s]
        y = pw @ mid + b[:, None]
        self._cache = (xp, mid, x.shape[2], l_out)
        return y

    def backward(self, gy):
        xp, mid, l_in, l_out = self._cache
        dw = self.params["dw"].values
        pw = self.params["pw"].values
        s, p, k = self.stride, self.pad, self.kernel
        self.params["pw"].add_grad(np.tensordot(gy, mid, axes=([0, 2], [0, 2])))
        self.params["b"].add_grad(gy.sum(axis=(0, 2)))
        gmid = pw.T @ gy
        gdw = np.zeros_like(dw)
        gxp = np.zeros_like(xp)
        for j in range(k):
            seg = xp[:, :, j:j + s * l_out:s]
            gdw[:, j] = (gmid * seg).sum(axis=(0, 2))
            gxp[:, :, j:j + s * l_out:s] += dw[None, :, j, None] * gmid
        self.params["dw"].add_grad(gdw)
        gx = gxp[:, :, p:p + l_in] if p else gxp
        return [gx]

    def config(self):
        return {"in_channels": self.in_channels, "out_channels": self.out_channels,
                "kernel": self.kernel, "stride": self.stride, "pad": self.pad}


# ---------------------------------------------------------------------------
# dense / shape plumbing


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self._init_tensor("w", np.zeros((out_features, in_features)))
        self._init_tensor("b", np.zeros(out_features))

    def init_params(self, rng):
        self._init_tensor("w", rng.standard_normal(
            (self.out_features, self.in_features)) * math.sqrt(2.0 / self.in_features))
        self._init_tensor("b", np.zeros(self.out_features))

    def forward(self, xs, *, train, rng):
        (x,) = xs
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"dense expects (batch, {self.in_features}), got {x.shape}")
        self._cache = x
        return x @ self.params["w"].values.T + self.params["b"].values

    def backward(self, gy):
        x = self._cache
        self.params["w"].add_grad(gy.T @ x)
        self.params["b"].add_grad(gy.sum(axis=0))
        return [gy @ self.params["w"].values]

    def config(self):
        return {"in_features": self.in_features, "out_features": self.out_features}


class Flatten(Layer):
    kind = "flatten"

    def forward(self, xs, *, train, rng):
        (x,) = xs
        _check_signal(x, self.kind)
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gy):
        return [gy.reshape(self._cache)]


class Reshape(Layer):
    """(batch, n) -> (batch, channels, length) with channels*length == n."""

    kind = "reshape"

    def __init__(self, channels: int, length: int):
        super().__init__()
        self.channels = channels
        self.length = length

    def forward(self, xs, *, train, rng):
        (x,) = xs
        if x.ndim != 2 or x.shape[1] != self.channels * self.length:
            raise ShapeError(
                f"reshape expects (batch, {self.channels * self.length}), got {x.shape}")
        return x.reshape(x.shape[0], self.channels, self.length)

    def backward(self, gy):
        return [gy.reshape(gy.shape[0], -1)]

    def config(self):
        return {"channels": self.channels, "length": self.length}


class PadRight(Layer):
    """Extend the time axis by replicating the final column."""

    kind = "pad_right"

    def __init__(self, amount: int):
        super().__init__()
        if amount < 0:
            raise ValueError("pad amount must be >= 0")
        self.amount = amount

    def forward(self, xs, *, train, rng):
        (x,) = xs
        _check_signal(x, self.kind)
        if self.amount == 0:
            return x
        return np.concatenate([x, np.repeat(x[:, :, -1:], self.amount, axis=2)], axis=2)

    def backward(self, gy):
        if self.amount == 0:
            return [gy]
        gx = gy[:, :, :-self.amount].copy()
        gx[:, :, -1] += gy[:, :, -self.amount:].sum(axis=2)
        return [gx]

    def config(self):
        return {"amount": self.amount}


class Trim(Layer):
    """Keep the first `length` columns of the time axis."""

    kind = "trim"

    def __init__(self, length: int):
        super().__init__()
        self.length = length

    def forward(self, xs, *, train, rng):
        (x,) = xs
        _check_signal(x, self.kind)
        if x.shape[2] < self.length:
            raise ShapeError(f"trim to {self.length} but input length is {x.shape[2]}")
        self._cache = x.shape[2]
        return x[:, :, :self.length]

    def backward(self, gy):
        l_in = self._cache
        gx = np.zeros((gy.shape[0], gy.shape[1], l_in))
        gx[:, :, :self.length] = gy
        return [gx]

    def config(self):
        return {"length": self.length}


class Concat(Layer):
    """Channel-wise concatenation of signal tensors with equal lengths."""

    kind = "concat"
    n_inputs = None  # variadic

    def forward(self, xs, *, train, rng):
        if len(xs) < 2:
            raise ShapeError("concat needs at least two inputs")
        lengths = {x.shape[2] for x in xs}
        if len(lengths) != 1:
            raise ShapeError(f"concat inputs disagree on length: {sorted(lengths)}")
        self._cache = [x.shape[1] for x in xs]
        return np.concatenate(xs, axis=1)

    def backward(self, gy):
        splits = np.cumsum(self._cache)[:-1]
        return [g.copy() for g in np.split(gy, splits, axis=1)]


# ---------------------------------------------------------------------------
# pooling


class MaxPool(Layer):
    kind = "maxpool"

    def __init__(self, width: int, stride: int | None = None, pad: int = 0):
        super().__init__()
        self.width = width
        self.stride = width if stride is None else stride
        self.pad = pad

    def forward(self, xs, *, train, rng):
        (x,) = xs
        _check_signal(x, self.kind)
        w, s, p = self.width, self.stride, self.pad
        l_out = conv_out_len(x.shape[2], w, s, p)
        xp = np.pad(x, ((0, 0), (0, 0), (p, p)), constant_values=-np.inf) if p else x
        windows = np.stack([xp[:, :, j:j + s * l_out:s] for j in range(w)], axis=3)
        argmax = windows.argmax(axis=3)
        self._cache = (x.shape, argmax, l_out)
        return windows.max(axis=3)

    def backward(self, gy):
        in_shape, argmax, l_out = self._cache
        s, p = self.stride, self.pad
        gxp = np.zeros((in_shape[0], in_shape[1], in_shape[2] + 2 * p))
        b_idx = np.arange(in_shape[0])[:, None, None]
        c_idx = np.arange(in_shape[1])[None, :, None]
        t_idx = np.arange(l_out)[None, None, :] * s + argmax
        np.add.at(gxp, (b_idx, c_idx, t_idx), gy)
        return [gxp[:, :, p:p + in_shape[2]] if p else gxp]

    def config(self):
        return {"width": self.width, "stride": self.stride, "pad": self.pad}


class AvgPool(Layer):
    """Average pooling; padded positions count toward the mean as zeros."""

    kind = "avgpool"

    def __init__(self, width: int, stride: int | None = None, pad: int = 0):
        super().__init__()
        self.width = width
        self.stride = width if stride is None else stride
        self.pad = pad

    def forward(self, xs, *, train, rng):
        (x,) = xs
        _check_signal(x, self.kind)
        w, s, p = self.width, self.stride, self.pad
        l_out = conv_out_len(x.shape[2], w, s, p)
        xp = np.pad(x, ((0, 0), (0, 0), (p, p))) if p else x
        y = np.zeros((x.shape[0], x.shape[1], l_out))
        for j in range(w):
            y += xp[:, :, j:j + s * l_out:s]
        self._cache = (x.shape, l_out)
        return y / w

    def backward(self, gy):
        in_shape, l_out = self._cache
        w, s, p = self.width, self.stride, self.pad
        gxp = np.zeros((in_shape[0], in_shape[1], in_shape[2] + 2 * p))
        g = gy / w
        for j in range(w):
            gxp[:, :, j:j + s * l_out:s] += g
        return [gxp[:, :, p:p + in_shape[2]] if p else gxp]

    def config(self):
        return {"width": self.width, "stride": self.stride, "pad": self.pad}


# ---------------------------------------------------------------------------
# activations


class Relu(Layer):
    kind = "relu"

    def forward(self, xs, *, train, rng):
        (x,) = xs
        self._cache = x > 0
        return np.where(self._cache, x, 0.0)

    def backward(self, gy):
        return [gy * self._cache]


class LeakyRelu(Layer):
    kind = "leaky_relu"

    def __init__(self, slope: float = 0.01):
        super().__init__()
        self.slope = slope

    def forward(self, xs, *, train, rng):
        (x,) = xs
        self._cache = x > 0
        return np.where(self._cache, x, self.slope * x)

    def backward(self, gy):
        return [np.where(self._cache, gy, self.slope * gy)]

    def config(self):
        return {"slope": self.slope}


class Tanh(Layer):
    kind = "tanh"

    def forward(self, xs, *, train, rng):
        (x,) = xs
        self._cache = np.tanh(x)
        return self._cache

    def backward(self, gy):
        return [gy * (1.0 - self._cache ** 2)]


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, xs, *, train, rng):
        (x,) = xs
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        self._cache = y
        return y

    def backward(self, gy):
        y = self._cache
        return [gy * y * (1.0 - y)]


# ---------------------------------------------------------------------------
# stochastic / spectral


class GaussianNoise(Layer):
    """Additive N(0, sigma^2) noise, active in train mode only."""

    kind = "gaussian_noise"

    def __init__(self, sigma: float):
        super().__init__()
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self.sigma = sigma

    def forward(self, xs, *, train, rng):
        (x,) = xs
        if not train or self.sigma == 0.0:
            return x
        if rng is None:
            raise ValueError("gaussian_noise in train mode needs an rng")
        return x + self.sigma * rng.standard_normal(x.shape)

    def backward(self, gy):
        return [gy]

    def config(self):
        return {"sigma": self.sigma}


class DftMagnitude(Layer):
    """Smoothed magnitude of the real-input DFT, per channel.

    Output bin k of a length-L channel is sqrt(Re^2 + Im^2 + eps) of
    sum_t x[t] * exp(-2i*pi*k*t/L), for k = 0..floor(L/2).  The eps term
    keeps the gradient finite at zero bins.
    """

    kind = "dft_magnitude"

    def forward(self, xs, *, train, rng):
        (x,) = xs
        _check_signal(x, self.kind)
        length = x.shape[2]
        if length < 2:
            raise ShapeError(f"dft_magnitude needs length >= 2, got {length}")
        z = np.fft.rfft(x, axis=2)
        mag = np.sqrt(z.real ** 2 + z.imag ** 2 + DFT_EPS)
        self._cache = (z, mag, length)
        return mag

    def backward(self, gy):
        z, mag, length = self._cache
        c = (gy * z.real / mag) + 1j * (gy * z.imag / mag)
        # adjoint of the one-sided DFT: sum_k c[k] * exp(+2i*pi*k*t/L)
        gx = length * np.fft.ifft(c, n=length, axis=2).real
        return [gx]


LAYER_KINDS: dict[str, type[Layer]] = {}


def register_layer(cls: type[Layer]) -> type[Layer]:
    LAYER_KINDS[cls.kind] = cls
    return cls


for _cls in (Conv1d, TConv1d, SepConv1d, Dense, Flatten, Reshape, PadRight, Trim,
             Concat, MaxPool, AvgPool, Relu, LeakyRelu, Tanh, Sigmoid,
             GaussianNoise, DftMagnitude):
    register_layer(_cls)


def layer_from_config(kind: str, cfg: dict) -> Layer:
    if kind not in LAYER_KINDS:
        raise ValueError(f"unknown layer kind {kind!r}")
    return LAYER_KINDS[kind](**cfg)
