"""Inference functions: ``fn(models, imgs) -> {"features": ..., "logits": ..., ...}``."""

from __future__ import annotations

from typing import Callable, Mapping

from .context import extract
from .errors import ValidationError


def default_fn(models: Mapping, imgs):
    G, C = extract([models], ["G", "C"], kind="model")
    features = G(imgs)
    return {"features": features, "logits": C(features)}


def _mcd_branches(models, imgs):
    G, C1, C2 = extract([models], ["G", "C1", "C2"], kind="model")
    features = G(imgs)
    return features, C1(features), C2(features)


def mcd_fn(models: Mapping, imgs):
    """Features and the summed logits of both classifier branches."""
    features, logits1, logits2 = _mcd_branches(models, imgs)
    return {"features": features, "logits": logits1 + logits2}


def mcd_full_fn(models: Mapping, imgs):
    """Like :func:`mcd_fn` but also returns each branch's logits."""
    features, logits1, logits2 = _mcd_branches(models, imgs)
    return {"features": features, "logits": logits1 + logits2, "logits1": logits1, "logits2": logits2}


INFERENCE_FNS: dict[str, Callable] = {
    "default": default_fn,
    "mcd": mcd_fn,
    "mcd_full": mcd_full_fn,
}


def get_inference_fn(name: str) -> Callable:
    try:
        return INFERENCE_FNS[name]
    except KeyError:
        raise ValidationError(f"unknown inference_fn {name!r}; choose from {sorted(INFERENCE_FNS)}") from None
