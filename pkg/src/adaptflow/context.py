"""The string-keyed context shared by hooks, plus the data-key grammar.

Data keys read ``{domain}_{base}[_{suffix}...]``, for example
``src_imgs_features``. Applying model ``G`` appends ``features``, ``C``
appends ``logits``, ``D`` appends ``dlogits``; ``detached`` is always last.
"""

from __future__ import annotations

from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import KeyCollision, MissingKey, TypeMismatch, ValidationError
from .modules import Module
from .tensor import Tensor

DOMAINS = ("src", "target")
BASES = ("imgs", "labels", "domain")
SUFFIXES = ("features", "logits", "dlogits", "detached")


class KeyParts(NamedTuple):
    domain: str
    base: str
    suffixes: tuple = ()


def render_key(domain: str, base: str, suffixes: Sequence[str] = ()) -> str:
    suffixes = tuple(suffixes)
    if domain not in DOMAINS:
        raise ValidationError(f"unknown domain {domain!r}; expected one of {DOMAINS}")
    if base not in BASES:
        raise ValidationError(f"unknown data name {base!r}; expected one of {BASES}")
    for s in suffixes:
        if s not in SUFFIXES:
            raise ValidationError(f"unknown suffix {s!r}; expected one of {SUFFIXES}")
    if "detached" in suffixes[:-1]:
        raise ValidationError("'detached' must be the final suffix")
    return "_".join((domain, base) + suffixes)


def parse_key(key: str) -> KeyParts:
    parts = key.split("_")
    if len(parts) < 2:
        raise ValidationError(f"not a data key: {key!r}")
    parsed = KeyParts(parts[0], parts[1], tuple(parts[2:]))
    render_key(*parsed)
    return parsed


def with_suffix(key: str, suffix: str) -> str:
    p = parse_key(key)
    return render_key(p.domain, p.base, p.suffixes + (suffix,))


def kind_of(value) -> str:
    if isinstance(value, (Tensor, np.ndarray)):
        return "tensor"
    if isinstance(value, Module):
        return "model"
    if hasattr(value, "step") and hasattr(value, "zero_grad"):
        return "optimizer"
    raise TypeMismatch(f"unsupported context value of type {type(value).__name__}")


class Context(dict):
    """A dict that refuses to rebind a key once it has been inserted."""

    def __init__(self, *args, **kwargs):
        super().__init__()
        self.update(*args, **kwargs)

    def __setitem__(self, key, value):
        if key in self:
            raise KeyCollision(key)
        kind_of(value)
        super().__setitem__(key, value)

    def __delitem__(self, key):
        raise TypeError("context bindings cannot be removed")

    def update(self, *args, **kwargs):
        for key, value in dict(*args, **kwargs).items():
            self[key] = value

    def setdefault(self, key, default=None):
        if key not in self:
            self[key] = default
        return self[key]

    def insert(self, key: str, value) -> "Context":
        self[key] = value
        return self

    def pop(self, *args):
        raise TypeError("context bindings cannot be removed")

    def popitem(self):
        raise TypeError("context bindings cannot be removed")

    def clear(self):
        raise TypeError("context bindings cannot be removed")


def extract(search_order: Sequence[Mapping], keys: Iterable[str], kind: str | None = None) -> list:
    """Fetch ``keys``, taking each from the earliest mapping that holds it."""
    found = []
    for key in keys:
        for ctx in search_order:
            if key in ctx:
                value = ctx[key]
                break
        else:
            available = set().union(*(set(c) for c in search_order)) if search_order else set()
            raise MissingKey(key, available)
        if kind is not None and kind_of(value) != kind:
            raise TypeMismatch(f"{key!r} holds a {kind_of(value)}, expected a {kind}")
        found.append(value)
    return found
