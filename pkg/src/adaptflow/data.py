"""Seeded synthetic domain-shift data and deterministic paired batching."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from .errors import ValidationError
from .tensor import Tensor

NOISE_STD = 0.3


@dataclass(frozen=True)
class Dataset:
    imgs: np.ndarray
    labels: np.ndarray | None
    domain_tag: str

    def __post_init__(self):
        if self.domain_tag not in ("src", "target"):
            raise ValidationError(f"domain_tag must be 'src' or 'target', got {self.domain_tag!r}")
        if self.labels is None and self.domain_tag == "src":
            raise ValidationError("source datasets need labels")
        if self.labels is not None and len(self.labels) != len(self.imgs):
            raise ValidationError("labels and imgs differ in length")

    def __len__(self):
        return len(self.imgs)

    def without_labels(self) -> "Dataset":
        return replace(self, labels=None)


def make_shifted_gaussians(n_per_class: int, n_classes: int, shift_angle_deg: float, seed: int,
                           noise: float = NOISE_STD):
    """Isotropic 2-D Gaussian classes centred on the unit circle.

    The target domain is the source distribution rotated by
    ``shift_angle_deg``. Target labels are kept for oracle evaluation only.
    """
    if n_classes < 2:
        raise ValidationError("n_classes must be >= 2")
    if n_per_class < 1:
        raise ValidationError("n_per_class must be >= 1")
    src_seq, tgt_seq = np.random.SeedSequence(seed).spawn(2)
    base = 2 * np.pi * np.arange(n_classes) / n_classes
    labels = np.repeat(np.arange(n_classes), n_per_class)

    def draw(seq, offset):
        rng = np.random.default_rng(seq)
        means = np.stack([np.cos(base + offset), np.sin(base + offset)], axis=1)
        return means[labels] + noise * rng.standard_normal((len(labels), 2))

    src = Dataset(draw(src_seq, 0.0), labels.copy(), "src")
    target = Dataset(draw(tgt_seq, math.radians(shift_angle_deg)), labels.copy(), "target")
    return src, target


@dataclass
class DataLoaders:
    src_train: Dataset
    target_train: Dataset
    target_val: Dataset
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")

    def _stream(self, rng: np.random.Generator, n: int, total: int) -> np.ndarray:
        reps = -(-total // n)
        return np.concatenate([rng.permutation(n) for _ in range(reps)])[:total]

    def n_batches(self) -> int:
        return -(-max(len(self.src_train), len(self.target_train)) // self.batch_size)

    def batches(self, epoch: int) -> Iterator[dict]:
        """Paired source/target batches; the shorter split cycles with reshuffling."""
        rng = np.random.default_rng([self.seed, epoch])
        total = max(len(self.src_train), len(self.target_train))
        src_idx = self._stream(rng, len(self.src_train), total)
        tgt_idx = self._stream(rng, len(self.target_train), total)
        for start in range(0, total, self.batch_size):
            s = src_idx[start:start + self.batch_size]
            t = tgt_idx[start:start + self.batch_size]
            yield {
                "src_imgs": Tensor(self.src_train.imgs[s]),
                "src_labels": self.src_train.labels[s],
                "target_imgs": Tensor(self.target_train.imgs[t]),
            }
