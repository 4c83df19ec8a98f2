"""Train tiny fully-connected classifiers and export them as .nn.json files.

The exported file follows the network schema of the envelope-tightening
toolchain: {"input_dim", "input_box", "layers": [{"W", "b", "activation"}]}
with row-major weight matrices (rows map the previous layer onto this one) and
the softmax head dropped, so the last layer is the raw affine logits.  A
sidecar .meta.json records the held-out accuracy.

Training is plain numpy: minibatch gradient descent on softmax cross-entropy
with L2 regularization.  MNIST is used when a local copy exists; --synthetic
falls back to Gaussian blob classes scaled into the unit box.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

__all__ = ["TrainSpec", "train_and_export", "DatasetUnavailableError"]

# activation tags shared with the consumer's catalog
TRAINABLE_ACTIVATIONS = ("sigmoid", "tanh", "relu", "softplus", "elu", "selu")

SELU_LAMBDA = 1.0507
SELU_ALPHA = 1.67326

MNIST_PATHS = (
    os.path.expanduser("~/.keras/datasets/mnist.npz"),
    os.path.expanduser("~/.cache/mnist.npz"),
    "mnist.npz",
)


class DatasetUnavailableError(RuntimeError):
    """No local MNIST copy and synthetic fallback not enabled."""


@dataclass
class TrainSpec:
    hidden: tuple
    activation: str = "sigmoid"
    l2: float = 0.005
    epochs: int = 300
    seed: int = 0
    out: str = "model.nn.json"
    synthetic: bool = False
    input_dim: int = 16  # synthetic data only; MNIST fixes 784
    n_classes: int = 4  # synthetic data only; MNIST fixes 10
    samples: int = 2000  # synthetic training set size
    lr: float = 0.15
    batch: int = 128

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.hidden or any(h <= 0 for h in self.hidden):
            raise ValueError("hidden layer sizes must be positive")
        if self.activation not in TRAINABLE_ACTIVATIONS:
            raise ValueError(
                f"activation {self.activation!r} not in {TRAINABLE_ACTIVATIONS}"
            )
        if self.l2 < 0 or self.epochs <= 0 or self.samples <= 0:
            raise ValueError("l2 must be >= 0 and epochs/samples positive")


def _act_pair(tag):
    if tag == "sigmoid":
        f = lambda z: 1.0 / (1.0 + np.exp(-np.clip(z, -60, 60)))
        return f, lambda z: f(z) * (1 - f(z))
    if tag == "tanh":
        return np.tanh, lambda z: 1.0 - np.tanh(z) ** 2
    if tag == "relu":
        return lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(float)
    if tag == "softplus":
        s = lambda z: 1.0 / (1.0 + np.exp(-np.clip(z, -60, 60)))
        return lambda z: np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0), s
    if tag == "elu":
        return (
            lambda z: np.where(z > 0, z, np.expm1(np.minimum(z, 0.0))),
            lambda z: np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0))),
        )
    if tag == "selu":
        return (
            lambda z: SELU_LAMBDA
            * np.where(z > 0, z, SELU_ALPHA * np.expm1(np.minimum(z, 0.0))),
            lambda z: SELU_LAMBDA
            * np.where(z > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(z, 0.0))),
        )
    raise ValueError(tag)


def _activation_dict(tag):
    if tag == "elu":
        return {"tag": "elu", "params": {"alpha": 1.0}}
    if tag == "selu":
        return {"tag": "selu", "params": {"lambda": SELU_LAMBDA, "alpha": SELU_ALPHA}}
    return {"tag": tag, "params": {}}


def load_mnist():
    for path in MNIST_PATHS:
        if os.path.exists(path):
            with np.load(path) as data:
                x = data["x_train"].reshape(-1, 784).astype(float) / 255.0
                y = data["y_train"].astype(int)
                xt = data["x_test"].reshape(-1, 784).astype(float) / 255.0
                yt = data["y_test"].astype(int)
            return (x[:20000], y[:20000]), (xt[:4000], yt[:4000])
    return None


def synthetic_blobs(rng, n, dim, classes):
    """Gaussian blobs min-max scaled into the unit box."""
    centers = rng.uniform(0.0, 1.0, size=(classes, dim))
    y = rng.integers(0, classes, size=n)
    x = centers[y] + rng.normal(0.0, 0.18, size=(n, dim))
    lo, hi = x.min(axis=0), x.max(axis=0)
    x = (x - lo) / np.where(hi - lo < 1e-12, 1.0, hi - lo)
    return x, y


def _init_params(rng, sizes):
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(fan_out, fan_in))
        params.append([W, np.zeros(fan_out)])
    return params


def _forward(params, act, X):
    pre, post = [], [X]
    for k, (W, b) in enumerate(params):
        z = post[-1] @ W.T + b
        pre.append(z)
        post.append(act(z) if k < len(params) - 1 else z)
    return pre, post


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_and_export(spec):
    """Run the training loop and write the .nn.json / .meta.json pair.

    Returns (model_path, metadata dict)."""
    rng = np.random.default_rng(spec.seed)
    if spec.synthetic:
        n_test = max(spec.samples // 5, 50)
        X, Y = synthetic_blobs(rng, spec.samples + n_test, spec.input_dim, spec.n_classes)
        Xt, Yt = X[spec.samples :], Y[spec.samples :]
        X, Y = X[: spec.samples], Y[: spec.samples]
        dataset = "synthetic"
    else:
        loaded = load_mnist()
        if loaded is None:
            raise DatasetUnavailableError(
                "no local MNIST copy found; pass --synthetic to train on blobs"
            )
        (X, Y), (Xt, Yt) = loaded
        dataset = "mnist"

    n_classes = int(Y.max()) + 1
    sizes = (X.shape[1],) + spec.hidden + (n_classes,)
    act, dact = _act_pair(spec.activation)
    params = _init_params(rng, sizes)
    n = X.shape[0]
    onehot = np.eye(n_classes)[Y]

    for _ in range(spec.epochs):
        order = rng.permutation(n)
        for start in range(0, n, spec.batch):
            idx = order[start : start + spec.batch]
            xb, yb = X[idx], onehot[idx]
            pre, post = _forward(params, act, xb)
            grad = (_softmax(pre[-1]) - yb) / len(idx)
            for k in range(len(params) - 1, -1, -1):
                W, b = params[k]
                gW = grad.T @ post[k] + spec.l2 * W
                gb = grad.sum(axis=0)
                if k > 0:
                    grad = (grad @ W) * dact(pre[k - 1])
                W -= spec.lr * gW
                b -= spec.lr * gb

    _, post = _forward(params, act, Xt)
    accuracy = float(np.mean(post[-1].argmax(axis=1) == Yt))

    doc = {
        "input_dim": int(X.shape[1]),
        "input_box": [[0.0, 1.0]] * int(X.shape[1]),
        "layers": [
            {
                "W": W.tolist(),
                "b": b.tolist(),
                "activation": _activation_dict(spec.activation)
                if k < len(params) - 1
                else None,
            }
            for k, (W, b) in enumerate(params)
        ],
    }
    with open(spec.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    meta = {
        "dataset": dataset,
        "test_accuracy": accuracy,
        "hidden": list(spec.hidden),
        "activation": spec.activation,
        "l2": spec.l2,
        "epochs": spec.epochs,
        "seed": spec.seed,
        "train_size": int(n),
    }
    meta_path = _meta_path(spec.out)
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return spec.out, meta


def _meta_path(out):
    base = out[: -len(".nn.json")] if out.endswith(".nn.json") else os.path.splitext(out)[0]
    return base + ".meta.json"


def main(argv=None):
    p = argparse.ArgumentParser(prog="fixture-trainer", description=__doc__)
    p.add_argument("--hidden", default="5,5,5,5,5", help="comma-separated hidden sizes")
    p.add_argument("--act", default="sigmoid", choices=TRAINABLE_ACTIVATIONS)
    p.add_argument("--l2", type=float, default=0.005)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output .nn.json path")
    p.add_argument("--synthetic", action="store_true", help="train on generated blobs")
    p.add_argument("--input-dim", type=int, default=16, help="synthetic input width")
    p.add_argument("--classes", type=int, default=4, help="synthetic class count")
    p.add_argument("--samples", type=int, default=2000, help="synthetic train size")
    args = p.parse_args(argv)
    try:
        spec = TrainSpec(
            hidden=[int(h) for h in args.hidden.split(",")],
            activation=args.act,
            l2=args.l2,
            epochs=args.epochs,
            seed=args.seed,
            out=args.out,
            synthetic=args.synthetic,
            input_dim=args.input_dim,
            n_classes=args.classes,
            samples=args.samples,
        )
    except ValueError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return 2
    try:
        path, meta = train_and_export(spec)
    except DatasetUnavailableError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(f"wrote {path} and {_meta_path(path)} (test accuracy {meta['test_accuracy']:.3f})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
