"""Epoch loop with periodic validation and best-checkpoint tracking."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import DataLoaders, Dataset
from .errors import NonFiniteLoss, ValidationError


@dataclass
class MetricsRecord:
    epoch: int
    losses: dict[str, float]
    score: float | None = None
    lr: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "losses": {k: self.losses[k] for k in sorted(self.losses)},
            "score": self.score,
            "lr": {k: self.lr[k] for k in sorted(self.lr)},
        }


@dataclass
class CheckpointRecord:
    epoch: int
    score: float
    state: dict[str, dict[str, np.ndarray]]


def collect_inference(adapter, dataset: Dataset, batch_size: int = 256) -> dict[str, np.ndarray]:
    """Run inference over ``dataset`` in order and stack every output."""
    if len(dataset) == 0:
        raise ValidationError("cannot collect inference on an empty dataset")
    parts = defaultdict(list)
    for start in range(0, len(dataset), batch_size):
        out = adapter.inference(dataset.imgs[start:start + batch_size])
        for key, value in out.items():
            parts[key].append(value.data)
    return {key: np.concatenate(chunks, axis=0) for key, chunks in parts.items()}


def _model_states(models) -> dict:
    return {name: m.state_dict() for name, m in models.items()}


class Trainer:
    """Train ``adapter`` and keep the checkpoint the validator scores highest.

    ``run`` returns ``(best_score, best_epoch)``; both are ``None`` when no
    validator is given. Ties keep the earliest epoch.
    """

    def __init__(self, adapter, validator=None, inference_batch_size: int = 256,
                 on_epoch_end: Callable[[MetricsRecord], None] | None = None):
        self.adapter = adapter
        self.validator = validator
        self.inference_batch_size = inference_batch_size
        self.on_epoch_end = on_epoch_end
        self.history: list[MetricsRecord] = []
        self.best: CheckpointRecord | None = None
        self.best_collected: dict | None = None
        self.first_step_counts: dict[str, int] | None = None

    def collect_splits(self, dataloaders: DataLoaders) -> dict:
        datasets = {"target_train": dataloaders.target_train, "target_val": dataloaders.target_val,
                    "src_train": dataloaders.src_train}
        splits = {}
        for split in self.validator.required_splits:
            ds = datasets[split]
            collected = collect_inference(self.adapter, ds, self.inference_batch_size)
            if ds.labels is not None:
                collected["labels"] = np.asarray(ds.labels)
            splits[split] = collected
        return splits

    def _train_epoch(self, dataloaders, epoch):
        sums: dict[str, float] = defaultdict(float)
        n = 0
        for b, batch in enumerate(dataloaders.batches(epoch)):
            # non-finite values are caught explicitly as NonFiniteLoss/NonFiniteGradient
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                losses = self._step(batch, epoch, b)
            for k, v in losses.items():
                sums[k] += v
            n += 1
        return {k: v / n for k, v in sums.items()}

    def _step(self, batch, epoch, b):
        models = self.adapter.models
        before = {k: m.call_count for k, m in models.items()} if self.first_step_counts is None else None
        try:
            losses = self.adapter.training_step(batch)
        except NonFiniteLoss as exc:
            raise NonFiniteLoss(exc.losses, where=f"epoch {epoch}, batch {b}") from exc
        if before is not None:
            self.first_step_counts = {k: m.call_count - before[k] for k, m in models.items()}
        return losses

    def run(self, dataloaders: DataLoaders, max_epochs: int = 1, val_interval: int = 1):
        if max_epochs < 1 or val_interval < 1:
            raise ValidationError("max_epochs and val_interval must be >= 1")
        for epoch in range(1, max_epochs + 1):
            losses = self._train_epoch(dataloaders, epoch)
            self.adapter.step_schedulers()
            score = None
            if self.validator is not None and epoch % val_interval == 0:
                splits = self.collect_splits(dataloaders)
                score = self.validator(**splits)
                if not math.isfinite(score):
                    raise ValidationError(f"validator returned non-finite score at epoch {epoch}")
                if self.best is None or score > self.best.score:
                    self.best = CheckpointRecord(epoch, score, _model_states(self.adapter.models))
                    self.best_collected = splits
            record = MetricsRecord(epoch, losses, score, self.adapter.learning_rates())
            self.history.append(record)
            if self.on_epoch_end is not None:
                self.on_epoch_end(record)
        if self.best is None:
            return None, None
        return self.best.score, self.best.epoch

    def restore_best(self):
        if self.best is None:
            raise ValidationError("no checkpoint has been recorded")
        for name, state in self.best.state.items():
            self.adapter.models[name].load_state_dict(state)
