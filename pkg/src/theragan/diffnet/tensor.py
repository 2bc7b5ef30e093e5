"""Value containers for the network engine."""

from __future__ import annotations

import numpy as np


class Tensor:
    """A float64 value array with an optional gradient buffer of the same shape.

    All arithmetic runs in float64 so finite-difference checks are
    meaningful; serialization narrows to float32 (see dataio).
    """

    __slots__ = ("values", "grad")

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.values)

    def add_grad(self, g: np.ndarray) -> None:
        if g.shape != self.values.shape:
            raise ValueError(f"gradient shape {g.shape} != value shape {self.values.shape}")
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g


def quantize_f32(a: np.ndarray) -> np.ndarray:
    """Round float64 values through float32 precision.

    Freshly initialized weights pass through this so that the float32
    model files round-trip bit-exactly.
    """
    return np.asarray(a, dtype=np.float32).astype(np.float64)
