"""Minimal reverse-mode network engine used by every model in the package."""

from .tensor import Tensor, quantize_f32
from .layers import (
    AvgPool, Concat, Conv1d, Dense, DftMagnitude, Flatten, GaussianNoise,
    Layer, LeakyRelu, MaxPool, PadRight, Relu, Reshape, SepConv1d, ShapeError,
    Sigmoid, Tanh, TConv1d, Trim, conv_out_len, layer_from_config,
    register_layer, tconv_out_len, LAYER_KINDS, DFT_EPS,
)
from .network import Network, Node
from .optim import Adam, AdamState, adam_step
from .losses import bce_loss, cross_entropy_loss, BCE_CLAMP
from .gradcheck import central_difference, check_network_gradients, relative_error

__all__ = [
    "Adam", "AdamState", "AvgPool", "BCE_CLAMP", "Concat", "Conv1d", "DFT_EPS",
    "Dense", "DftMagnitude", "Flatten", "GaussianNoise", "LAYER_KINDS", "Layer",
    "LeakyRelu", "MaxPool", "Network", "Node", "PadRight", "Relu", "Reshape",
    "SepConv1d", "ShapeError", "Sigmoid", "TConv1d", "Tanh", "Tensor", "Trim",
    "adam_step", "bce_loss", "central_difference", "check_network_gradients",
    "conv_out_len", "cross_entropy_loss", "layer_from_config", "quantize_f32",
    "register_layer", "relative_error", "tconv_out_len",
]
