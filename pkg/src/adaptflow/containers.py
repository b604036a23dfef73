"""Model maps and optimizer/scheduler containers that fan out per model."""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from .errors import MissingKey, NonFiniteGradient, ValidationError
from .modules import Module
from .tensor import Tensor


class SGD:
    def __init__(self, params: Iterable[Tensor], lr: float = 0.01, weight_decay: float = 0.0):
        if not lr > 0:
            raise ValidationError(f"lr must be positive, got {lr}")
        if weight_decay < 0:
            raise ValidationError("weight_decay must be non-negative")
        self.params = list(params)
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def _grads(self):
        for p in self.params:
            if p.grad is None:
                continue
            if not np.all(np.isfinite(p.grad)):
                raise NonFiniteGradient(f"non-finite gradient for parameter of shape {p.shape}")
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            yield p, g

    def step(self):
        for p, g in list(self._grads()):
            p.data = p.data - self.lr * g


class Adam(SGD):
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        super().__init__(params, lr, weight_decay)
        self.betas = (float(betas[0]), float(betas[1]))
        self.eps = float(eps)
        self.state: dict[int, dict] = {}

    def step(self):
        b1, b2 = self.betas
        for p, g in list(self._grads()):
            st = self.state.setdefault(id(p), {"t": 0, "m": np.zeros_like(p.data), "v": np.zeros_like(p.data)})
            st["t"] += 1
            st["m"] = b1 * st["m"] + (1 - b1) * g
            st["v"] = b2 * st["v"] + (1 - b2) * g * g
            m_hat = st["m"] / (1 - b1 ** st["t"])
            v_hat = st["v"] / (1 - b2 ** st["t"])
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class ExponentialLR:
    """Multiply the optimizer's lr by ``gamma`` on each ``step`` (one per epoch)."""

    def __init__(self, optimizer, gamma: float):
        if not 0 < gamma <= 1:
            raise ValidationError(f"gamma must be in (0, 1], got {gamma}")
        self.optimizer = optimizer
        self.gamma = float(gamma)
        self.base_lr = optimizer.lr
        self.epoch = 0

    def step(self):
        self.epoch += 1
        self.optimizer.lr = self.optimizer.lr * self.gamma


OPTIMIZERS = {"sgd": SGD, "adam": Adam}
SCHEDULERS = {"exponential": ExponentialLR}


def _resolve(cls_or_name, registry):
    if isinstance(cls_or_name, str):
        try:
            return registry[cls_or_name]
        except KeyError:
            raise ValidationError(f"unknown algorithm {cls_or_name!r}; choose from {sorted(registry)}") from None
    return cls_or_name


class Models(dict):
    """Model-name -> model map."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        for name, model in self.items():
            if not isinstance(model, Module):
                raise ValidationError(f"{name!r} is not a model")

    def require(self, names: Iterable[str]):
        for name in names:
            if name not in self:
                raise MissingKey(name, self.keys())
        return self

    def merge(self, other: Mapping) -> "Models":
        return Models({**self, **other})


class _SpecContainer:
    """Holds ``(factory, kwargs)`` either for all names or per name."""

    registry: dict = {}

    def __init__(self, spec=None, **per_name):
        self.default = None
        self.per_name: dict[str, tuple] = {}
        if isinstance(spec, Mapping):
            per_name = {**spec, **per_name}
        elif spec is not None:
            self.default = self._normalize(spec)
        for name, s in per_name.items():
            self.per_name[name] = self._normalize(s)

    def _normalize(self, spec):
        factory, kwargs = spec if isinstance(spec, tuple) else (spec, {})
        return _resolve(factory, self.registry), dict(kwargs)

    def spec_for(self, name):
        return self.per_name.get(name, self.default)

    def merge(self, other: "_SpecContainer"):
        merged = type(self)()
        merged.default = other.default or self.default
        merged.per_name = {**self.per_name, **other.per_name}
        return merged


class Optimizers(_SpecContainer):
    """``Optimizers((Adam, {"lr": 1e-3}))`` creates one optimizer per model."""

    registry = OPTIMIZERS

    def create_with(self, models: Mapping[str, Module]) -> dict:
        if not models:
            raise ValidationError("cannot create optimizers for an empty model map")
        out = {}
        for name, model in models.items():
            spec = self.spec_for(name)
            if spec is None:
                continue
            factory, kwargs = spec
            out[name] = factory(model.parameters(), **kwargs)
        return out


class LRSchedulers(_SpecContainer):
    """``LRSchedulers((ExponentialLR, {"gamma": 0.99}))``: one scheduler per optimizer."""

    registry = SCHEDULERS

    def create_with(self, optimizers: Mapping) -> dict:
        if not optimizers:
            raise ValidationError("cannot create schedulers for an empty optimizer map")
        out = {}
        for name, opt in optimizers.items():
            spec = self.spec_for(name)
            if spec is None:
                continue
            factory, kwargs = spec
            out[name] = factory(opt, **kwargs)
        return out


def materialize_optimizers(spec, models: Mapping[str, Module]) -> dict:
    container = spec if isinstance(spec, Optimizers) else Optimizers(spec)
    return container.create_with(models)


def materialize_schedulers(spec, optimizers: Mapping) -> dict:
    container = spec if isinstance(spec, LRSchedulers) else LRSchedulers(spec)
    return container.create_with(optimizers)
