"""Checkpoint scorers; higher scores are better.

Validators take plain ``split -> {key: array}`` maps so they can run on
saved inference outputs as well as inside the trainer::

    score = BNMValidator()(target_train={"logits": logits})
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .errors import MissingKey, ValidationError
from .spectral import singular_values
from .tensor import Tensor, _softmax


def _array(value) -> np.ndarray:
    return np.asarray(value.data if isinstance(value, Tensor) else value, dtype=np.float64)


class BaseValidator:
    required_splits: dict[str, tuple[str, ...]] = {}

    def __call__(self, **splits):
        data = {}
        for split, keys in self.required_splits.items():
            if split not in splits:
                raise MissingKey(split, splits.keys())
            available = splits[split]
            for key in keys:
                if key not in available:
                    raise MissingKey(f"{split}.{key}", (f"{split}.{k}" for k in available))
            data[split] = {key: _array(available[key]) for key in keys}
        return float(self.compute_score(data))

    def compute_score(self, data: Mapping[str, Mapping[str, np.ndarray]]) -> float:
        raise NotImplementedError


def bnm_score(logits) -> float:
    """Nuclear norm of the softmax matrix, scaled into (0, 1].

    The divisor ``sqrt(B * min(B, C))`` is the largest nuclear norm a
    row-stochastic ``B x C`` matrix can have (balanced distinct one-hots),
    and equals ``min(B, C)`` for square inputs.
    """
    z = _array(logits)
    if z.ndim != 2 or z.shape[0] == 0 or z.shape[1] == 0:
        raise ValidationError(f"bnm score needs a non-empty [B x C] logits matrix, got shape {z.shape}")
    b, c = z.shape
    return float(singular_values(_softmax(z)).sum() / np.sqrt(b * min(b, c)))


def accuracy(logits, labels) -> float:
    z = _array(logits)
    y = np.asarray(labels).reshape(-1)
    if z.ndim != 2 or z.shape[0] == 0:
        raise ValidationError(f"accuracy needs a non-empty [B x C] logits matrix, got shape {z.shape}")
    if y.shape[0] != z.shape[0]:
        raise ValidationError(f"{z.shape[0]} logits rows but {y.shape[0]} labels")
    # np.argmax returns the first maximal index, i.e. ties go to the lowest class
    return float(np.mean(np.argmax(z, axis=1) == y))


class BNMValidator(BaseValidator):
    def __init__(self, split: str = "target_train"):
        self.split = split
        self.required_splits = {split: ("logits",)}

    def compute_score(self, data):
        return bnm_score(data[self.split]["logits"])


class AccuracyValidator(BaseValidator):
    def __init__(self, split: str = "target_val"):
        self.split = split
        self.required_splits = {split: ("logits", "labels")}

    def compute_score(self, data):
        return accuracy(data[self.split]["logits"], data[self.split]["labels"])


VALIDATORS = {"bnm": BNMValidator, "accuracy": AccuracyValidator}


def get_validator(name: str) -> BaseValidator:
    try:
        return VALIDATORS[name]()
    except KeyError:
        raise ValidationError(f"unknown validator {name!r}; choose from {sorted(VALIDATORS)}") from None


def validate_checkpoint(validator: BaseValidator, collected: Mapping[str, Mapping]) -> float:
    return validator(**collected)
