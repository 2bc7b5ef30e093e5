"""Directed acyclic networks assembled from layers.

A Network is a list of named nodes; each node consumes earlier nodes or
graph inputs and the final node is the output.  Forward caches per-node
activations so a single backward sweep can push a loss gradient to every
parameter and to the graph inputs.
"""

from __future__ import annotations

import numpy as np

from .layers import Layer, ShapeError, layer_from_config
from .tensor import Tensor


class Node:
    __slots__ = ("name", "layer", "inputs")

    def __init__(self, name: str, layer: Layer, inputs: list[str]):
        self.name = name
        self.layer = layer
        self.inputs = list(inputs)


class Network:
    """A DAG of layers with named inputs and one output node."""

    def __init__(self, input_names: list[str]):
        self.input_names = list(input_names)
        self.nodes: list[Node] = []
        self._names = set(self.input_names)
        self.output_name: str | None = None

    def add(self, name: str, layer: Layer, inputs: str | list[str]) -> str:
        """Append a node; inputs must already exist (keeps the graph acyclic)."""
        if name in self._names:
            raise ValueError(f"duplicate node name {name!r}")
        inputs = [inputs] if isinstance(inputs, str) else list(inputs)
        for src in inputs:
            if src not in self._names:
                raise ValueError(f"node {name!r} consumes unknown input {src!r}")
        self.nodes.append(Node(name, layer, inputs))
        self._names.add(name)
        self.output_name = name
        return name

    def set_output(self, name: str) -> None:
        if name not in self._names or name in self.input_names:
            raise ValueError(f"output must be an existing node, got {name!r}")
        self.output_name = name

    # -- parameters ---------------------------------------------------------

    def init_params(self, seed: int) -> None:
        """Deterministic per-node initialization from one seed."""
        children = np.random.SeedSequence(seed).spawn(len(self.nodes))
        for node, child in zip(self.nodes, children):
            node.layer.init_params(np.random.Generator(np.random.PCG64(child)))

    def named_params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for node in self.nodes:
            for pname, tensor in node.layer.params.items():
                out[f"{node.name}/{pname}"] = tensor
        return out

    def zero_grads(self) -> None:
        for tensor in self.named_params().values():
            tensor.zero_grad()

    def param_count(self) -> int:
        return sum(t.size for t in self.named_params().values())

    # -- execution ----------------------------------------------------------

    def forward(self, inputs: dict[str, np.ndarray], *, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        missing = [n for n in self.input_names if n not in inputs]
        if missing:
            raise ShapeError(f"missing network inputs: {missing}")
        values: dict[str, np.ndarray] = {
            n: np.asarray(inputs[n], dtype=np.float64) for n in self.input_names}
        for node in self.nodes:
            xs = [values[src] for src in node.inputs]
            try:
                values[node.name] = node.layer.forward(xs, train=train, rng=rng)
            except ShapeError as e:
                raise ShapeError(f"node {node.name!r}: {e}") from None
        self._values = values
        return values[self.output_name]

    def backward(self, g_output: np.ndarray) -> dict[str, np.ndarray]:
        """Propagate a gradient w.r.t. the output back through the graph.

        Parameter gradients accumulate on each layer's tensors; the return
        value maps graph input names to their gradients.
        """
        grads: dict[str, np.ndarray] = {self.output_name: np.asarray(g_output, dtype=np.float64)}
        for node in reversed(self.nodes):
            g = grads.pop(node.name, None)
            if g is None:
                continue  # dead branch
            gxs = node.layer.backward(g)
            for src, gx in zip(node.inputs, gxs):
                if src in grads:
                    grads[src] = grads[src] + gx
                else:
                    grads[src] = gx
        return {name: grads[name] for name in self.input_names if name in grads}

    # -- serialization ------------------------------------------------------

    def to_config(self) -> dict:
        return {
            "inputs": list(self.input_names),
            "output": self.output_name,
            "nodes": [
                {"name": n.name, "kind": n.layer.kind, "inputs": list(n.inputs),
                 "config": n.layer.config()}
                for n in self.nodes
            ],
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "Network":
        net = cls(cfg["inputs"])
        for spec in cfg["nodes"]:
            net.add(spec["name"], layer_from_config(spec["kind"], spec["config"]),
                    spec["inputs"])
        net.set_output(cfg["output"])
        return net
