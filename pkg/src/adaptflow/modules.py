"""Small trainable models with forward-call counters."""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .errors import DimensionError
from .tensor import Tensor


class Module:
    """Base model. ``call_count`` increases by one on every forward call."""

    def __init__(self):
        self.call_count = 0

    def __call__(self, x: Tensor) -> Tensor:
        self.call_count += 1
        return self.forward(x)

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return []

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = dict(self.named_parameters())
        if set(params) != set(state):
            raise KeyError(f"parameter names differ: {sorted(params)} vs {sorted(state)}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise DimensionError(f"{name}: shape {value.shape} vs {p.shape}")
            p.data = value.copy()

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator | None = None):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / math.sqrt(in_features)
        self.weight = Tensor(rng.uniform(-bound, bound, (out_features, in_features)), requires_grad=True)
        self.bias = Tensor(rng.uniform(-bound, bound, (out_features,)), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise DimensionError(
                f"Linear({self.in_features}, {self.out_features}) got input of shape {x.shape}; "
                f"weight shape {self.weight.shape}"
            )
        return T.linear(x, self.weight, self.bias)

    def named_parameters(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def __repr__(self):
        return f"Linear({self.in_features}, {self.out_features})"


class ReLU(Module):
    def forward(self, x):
        return T.relu(x)

    def __repr__(self):
        return "ReLU()"


class Sequential(Module):
    def __init__(self, *layers: Module):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x

    def named_parameters(self):
        return [
            (f"{i}.{name}", p)
            for i, layer in enumerate(self.layers)
            for name, p in layer.named_parameters()
        ]

    def __repr__(self):
        return f"Sequential({', '.join(map(repr, self.layers))})"


def build_models(algorithm: str, n_classes: int, seed: int, in_dim: int = 2, hidden: int = 16) -> dict:
    """Default architectures.

    G is in->hidden linear + relu; C, C1, C2 are hidden->n_classes linear;
    D is hidden->hidden linear + relu -> 1.
    """
    rng = np.random.default_rng(seed)
    models = {"G": Sequential(Linear(in_dim, hidden, rng), ReLU())}
    if algorithm == "mcd":
        models["C1"] = Linear(hidden, n_classes, rng)
        models["C2"] = Linear(hidden, n_classes, rng)
    else:
        models["C"] = Linear(hidden, n_classes, rng)
    if algorithm == "dann":
        models["D"] = Sequential(Linear(hidden, hidden, rng), ReLU(), Linear(hidden, 1, rng))
    return models
