"""Build and run an experiment from an :class:`ExperimentConfig`."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


from .adapters import ADAPTERS
from .config import ExperimentConfig, dump_config
from .containers import LRSchedulers, Optimizers
from .data import DataLoaders, make_shifted_gaussians
from .hooks.adaptation import AlgoHyperParams
from .inference import get_inference_fn
from .io import write_checkpoint, write_dump
from .modules import build_models
from .trainer import Trainer, collect_inference
from .validators import accuracy, get_validator


@dataclass
class Experiment:
    config: ExperimentConfig
    adapter: object
    dataloaders: DataLoaders
    validator: object


def hyperparams(cfg: ExperimentConfig) -> AlgoHyperParams:
    return AlgoHyperParams(**cfg.hyperparams.model_dump())


def build_adapter(cfg: ExperimentConfig, models) -> object:
    kwargs = {}
    if cfg.algorithm == "classifier":
        kwargs["post"] = list(cfg.post_hooks)
    schedulers = LRSchedulers(("exponential", {"gamma": cfg.scheduler.gamma})) if cfg.scheduler else None
    return ADAPTERS[cfg.algorithm](
        models,
        Optimizers((cfg.optimizer.name, cfg.optimizer.kwargs())),
        schedulers,
        inference_fn=get_inference_fn(cfg.resolved_inference_fn()),
        hyperparams=hyperparams(cfg),
        **kwargs,
    )


def build_experiment(cfg: ExperimentConfig) -> Experiment:
    ds = cfg.dataset
    src, target = make_shifted_gaussians(ds.n_per_class, ds.n_classes, ds.shift_angle_deg, cfg.seed)
    loaders = DataLoaders(src, target.without_labels(), target, ds.batch_size, cfg.seed)
    models = build_models(cfg.algorithm, ds.n_classes, cfg.seed)
    return Experiment(cfg, build_adapter(cfg, models), loaders, get_validator(cfg.validator))


def oracle_accuracy(adapter, dataloaders: DataLoaders) -> float:
    val = dataloaders.target_val
    return accuracy(collect_inference(adapter, val)["logits"], val.labels)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Train, then write config, metrics, best checkpoint, dump and summary."""
    exp = build_experiment(cfg)
    out = Path(out_dir) if out_dir is not None else None
    metrics_file = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(dump_config(cfg))
        metrics_file = open(out / "metrics.jsonl", "w")

    def log(record):
        if metrics_file is not None:
            metrics_file.write(json.dumps(record.to_dict()) + "\n")
            metrics_file.flush()

    trainer = Trainer(exp.adapter, exp.validator, on_epoch_end=log)
    try:
        best_score, best_epoch = trainer.run(exp.dataloaders, cfg.max_epochs, cfg.val_interval)
    finally:
        if metrics_file is not None:
            metrics_file.close()

    summary = {
        "algorithm": cfg.algorithm,
        "best_score": best_score,
        "best_epoch": best_epoch,
        "oracle_target_accuracy": oracle_accuracy(exp.adapter, exp.dataloaders),
        "first_step_forward_counts": dict(sorted(trainer.first_step_counts.items())),
    }
    if trainer.best is not None:
        trainer.restore_best()
        summary["best_checkpoint_oracle_target_accuracy"] = oracle_accuracy(exp.adapter, exp.dataloaders)
    if out is not None:
        if trainer.best is not None:
            write_checkpoint(out / "best_checkpoint.txt", trainer.best.state, trainer.best.epoch, trainer.best.score)
            write_dump(out / "best_dump.json", trainer.best_collected)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    summary["history"] = trainer.history
    return summary
