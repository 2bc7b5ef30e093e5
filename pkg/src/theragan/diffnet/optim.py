"""First-order optimization: Adam with bias correction."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class AdamState:
    __slots__ = ("m", "v", "t")

    def __init__(self, shape: tuple[int, ...]):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0


def adam_step(values: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> np.ndarray:
    """One Adam update; mutates `state`, returns the new parameter values."""
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad ** 2
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    return values - lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Adam over a fixed set of named tensors."""

    def __init__(self, params: dict[str, Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = {name: AdamState(t.shape) for name, t in params.items()}

    def step(self) -> None:
        for name, tensor in self.params.items():
            if tensor.grad is None:
                continue
            tensor.values = adam_step(tensor.values, tensor.grad, self.state[name],
                                      self.lr, self.beta1, self.beta2, self.eps)

    def zero_grads(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()
