"""Scalar losses with analytic gradients."""

from __future__ import annotations

import numpy as np

BCE_CLAMP = 1e-7


def bce_loss(predictions: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Binary cross-entropy, mean over all elements.

    Predictions are clamped to [1e-7, 1 - 1e-7]; the gradient is zero where
    the clamp is active.
    """
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"predictions {p.shape} and labels {y.shape} differ in shape")
    pc = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    loss = -np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    grad = (pc - y) / (pc * (1.0 - pc)) / p.size
    grad = np.where((p > BCE_CLAMP) & (p < 1.0 - BCE_CLAMP), grad, 0.0)
    return float(loss), grad


def cross_entropy_loss(probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Categorical cross-entropy over class probabilities.

    `probs` is (batch, classes); `labels` is an int vector of class indices.
    Returns the mean loss and its gradient w.r.t. `probs`.
    """
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels)
    n = p.shape[0]
    picked = p[np.arange(n), y]
    pc = np.clip(picked, BCE_CLAMP, None)
    loss = -np.mean(np.log(pc))
    grad = np.zeros_like(p)
    live = picked > BCE_CLAMP
    grad[np.arange(n)[live], y[live]] = -1.0 / (pc[live] * n)
    return float(loss), grad
