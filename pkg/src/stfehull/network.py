"""Feed-forward network model: JSON round-trip, forward evaluation, and
interval-arithmetic propagation of preactivation bounds."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .activations import (
    Activation,
    Interval,
    UnknownActivationError,
    activation_from_dict,
    make_activation,
    range_on_interval,
)

__all__ = [
    "Layer",
    "NetworkModel",
    "LayerState",
    "ActivationBounds",
    "MalformedNetworkError",
    "NetworkDimensionError",
    "UnknownActivationError",
    "forward",
    "interval_propagate",
    "load_json",
    "save_json",
    "make_random_net",
]


class MalformedNetworkError(ValueError):
    """The on-disk representation cannot be parsed into a network."""


class NetworkDimensionError(ValueError):
    """Layer shapes do not chain, or an input has the wrong dimension."""


@dataclass
class Layer:
    """One affine stage: a = W @ h_prev + b, optionally followed by an
    activation.  W rows map the previous layer onto this layer's neurons."""

    W: np.ndarray
    b: np.ndarray
    act: Activation | None

    @property
    def size(self):
        return self.W.shape[0]


@dataclass
class NetworkModel:
    """Layered affine/activation network over a finite input box.

    Every layer except the last carries an activation; the last is the raw
    affine output.  Immutable by convention after construction.
    """

    input_dim: int
    input_box: np.ndarray
    layers: list[Layer]

    def __post_init__(self):
        self.input_box = np.asarray(self.input_box, dtype=float)
        if self.input_box.shape != (self.input_dim, 2):
            raise NetworkDimensionError(
                f"input_box must have shape ({self.input_dim}, 2)"
            )
        if not np.isfinite(self.input_box).all() or np.any(
            self.input_box[:, 0] > self.input_box[:, 1]
        ):
            raise MalformedNetworkError("input_box must be finite with lo <= hi")
        prev = self.input_dim
        for k, layer in enumerate(self.layers):
            layer.W = np.asarray(layer.W, dtype=float)
            layer.b = np.asarray(layer.b, dtype=float)
            if layer.W.ndim != 2 or layer.W.shape[1] != prev:
                raise NetworkDimensionError(
                    f"layer {k}: W has shape {layer.W.shape}, expected (*, {prev})"
                )
            if layer.b.shape != (layer.W.shape[0],):
                raise NetworkDimensionError(f"layer {k}: b does not match W")
            if not (np.isfinite(layer.W).all() and np.isfinite(layer.b).all()):
                raise MalformedNetworkError(f"layer {k}: non-finite parameters")
            hidden = k < len(self.layers) - 1
            if hidden and layer.act is None:
                raise MalformedNetworkError(f"hidden layer {k} has no activation")
            prev = layer.W.shape[0]

    @property
    def n_hidden(self):
        return len(self.layers) - 1

    def hidden_sizes(self):
        return [layer.size for layer in self.layers[:-1]]


@dataclass
class LayerState:
    """Preactivations and postactivations per layer for one input.  The last
    layer has no activation, so its postactivation is the raw affine output."""

    pre: list[np.ndarray]
    post: list[np.ndarray]

    @property
    def output(self):
        return self.post[-1]


@dataclass
class ActivationBounds:
    """Per-layer (n, 2) arrays of certified preactivation intervals."""

    pre: list[np.ndarray]

    def copy(self):
        return ActivationBounds([p.copy() for p in self.pre])

    def interval(self, layer, neuron):
        lo, hi = self.pre[layer][neuron]
        return Interval(float(lo), float(hi))


def forward(net, x):
    """Evaluate the network, keeping every layer's pre- and postactivation."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise NetworkDimensionError(f"input must have shape ({net.input_dim},)")
    if np.any(x < net.input_box[:, 0] - 1e-9) or np.any(x > net.input_box[:, 1] + 1e-9):
        raise ValueError("input outside the input box")
    pre, post = [], []
    h = x
    for layer in net.layers:
        a = layer.W @ h + layer.b
        pre.append(a)
        h = layer.act.value(a) if layer.act is not None else a
        post.append(h)
    return LayerState(pre=pre, post=post)


def _affine_interval(W, b, lo, hi):
    pos = np.maximum(W, 0.0)
    neg = np.minimum(W, 0.0)
    return pos @ lo + neg @ hi + b, pos @ hi + neg @ lo + b


def postactivation_box(layer, pre_bounds):
    """Exact image of the preactivation intervals under the layer activation."""
    if layer.act is None:
        return pre_bounds.copy()
    out = np.empty_like(pre_bounds)
    for j in range(pre_bounds.shape[0]):
        iv = range_on_interval(layer.act, Interval(*pre_bounds[j]))
        out[j] = (iv.lo, iv.hi)
    return out


def interval_propagate(net, from_layer=0, bounds=None):
    """Layer-by-layer interval arithmetic on preactivations.

    With ``from_layer`` and existing ``bounds``, re-propagates only the deeper
    layers, taking the (possibly tightened) intervals of layer from_layer-1
    as given.
    """
    if bounds is None:
        bounds = ActivationBounds(pre=[None] * len(net.layers))
    if from_layer == 0:
        lo, hi = net.input_box[:, 0], net.input_box[:, 1]
    else:
        post = postactivation_box(net.layers[from_layer - 1], bounds.pre[from_layer - 1])
        lo, hi = post[:, 0], post[:, 1]
    for k in range(from_layer, len(net.layers)):
        layer = net.layers[k]
        a_lo, a_hi = _affine_interval(layer.W, layer.b, lo, hi)
        bounds.pre[k] = np.column_stack([a_lo, a_hi])
        if k < len(net.layers) - 1:
            post = postactivation_box(layer, bounds.pre[k])
            lo, hi = post[:, 0], post[:, 1]
    return bounds


def save_json(net, path):
    doc = {
        "input_dim": net.input_dim,
        "input_box": net.input_box.tolist(),
        "layers": [
            {
                "W": layer.W.tolist(),
                "b": layer.b.tolist(),
                "activation": layer.act.to_dict() if layer.act is not None else None,
            }
            for layer in net.layers
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedNetworkError(f"{path}: {exc}") from None
    return network_from_dict(doc)


def network_from_dict(doc):
    if not isinstance(doc, dict):
        raise MalformedNetworkError("network document must be a JSON object")
    try:
        input_dim = int(doc["input_dim"])
        box = doc["input_box"]
        raw_layers = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedNetworkError(f"missing or bad field: {exc}") from None
    if not isinstance(raw_layers, list) or not raw_layers:
        raise MalformedNetworkError("'layers' must be a non-empty list")
    layers = []
    for k, entry in enumerate(raw_layers):
        if not isinstance(entry, dict) or "W" not in entry or "b" not in entry:
            raise MalformedNetworkError(f"layer {k} must have 'W' and 'b'")
        spec = entry.get("activation")
        act = None if spec is None else activation_from_dict(spec)
        try:
            W = np.asarray(entry["W"], dtype=float)
            b = np.asarray(entry["b"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise MalformedNetworkError(f"layer {k}: {exc}") from None
        layers.append(Layer(W=W, b=b, act=act))
    try:
        box = np.asarray(box, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedNetworkError(f"input_box: {exc}") from None
    return NetworkModel(input_dim=input_dim, input_box=box, layers=layers)


def make_random_net(layer_sizes, act_tag, seed, act_params=None, input_box=None):
    """Reproducible random network: weights uniform in +-4/fan_in, biases in
    [-1, 1], which keeps preactivation intervals inside the activations'
    curved region at these widths; input box defaults to the unit cube.

    ``layer_sizes`` lists every width including input and output, e.g.
    (6, 5, 5, 3).
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ValueError("layer_sizes needs >= 2 positive entries")
    rng = np.random.default_rng(seed)
    act_params = act_params or {}
    layers = []
    for k in range(1, len(sizes)):
        fan_in = sizes[k - 1]
        W = rng.uniform(-4.0 / fan_in, 4.0 / fan_in, size=(sizes[k], fan_in))
        b = rng.uniform(-1.0, 1.0, size=sizes[k])
        act = make_activation(act_tag, **act_params) if k < len(sizes) - 1 else None
        layers.append(Layer(W=W, b=b, act=act))
    if input_box is None:
        input_box = np.column_stack([np.zeros(sizes[0]), np.ones(sizes[0])])
    return NetworkModel(input_dim=sizes[0], input_box=input_box, layers=layers)
