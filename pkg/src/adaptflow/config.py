"""Experiment configuration (a single JSON document; unknown fields are errors)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import pydantic
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ValidationError


class ConfigError(ValidationError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OptimizerConfig(_Strict):
    name: Literal["sgd", "adam"] = "sgd"
    lr: float = Field(0.01, gt=0)
    weight_decay: float = Field(0.0, ge=0)
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0)

    def kwargs(self) -> dict:
        kw = {"lr": self.lr, "weight_decay": self.weight_decay}
        if self.name == "adam":
            kw.update(betas=self.betas, eps=self.eps)
        return kw


class SchedulerConfig(_Strict):
    name: Literal["exponential"] = "exponential"
    gamma: float = Field(1.0, gt=0, le=1)


class HyperParamsConfig(_Strict):
    grl_lambda: float = Field(1.0, gt=0)
    bsp_k: int = Field(1, ge=1)
    bsp_weight: float = 1e-4
    bnm_weight: float = 1.0
    mcd_repeat: int = Field(4, ge=1)


class DatasetConfig(_Strict):
    n_per_class: int = Field(200, ge=1)
    n_classes: int = Field(3, ge=2)
    shift_angle_deg: float = 45.0
    batch_size: int = Field(32, ge=1)


class ExperimentConfig(_Strict):
    algorithm: Literal["classifier", "dann", "mcd"]
    post_hooks: list[Literal["bsp", "bnm"]] = []
    optimizer: OptimizerConfig = OptimizerConfig()
    scheduler: Optional[SchedulerConfig] = None
    hyperparams: HyperParamsConfig = HyperParamsConfig()
    dataset: DatasetConfig = DatasetConfig()
    seed: int
    max_epochs: int = Field(ge=1)
    val_interval: int = Field(1, ge=1)
    validator: Literal["bnm", "accuracy"] = "bnm"
    inference_fn: Optional[Literal["default", "mcd", "mcd_full"]] = None

    @model_validator(mode="after")
    def _consistent(self):
        if self.post_hooks and self.algorithm != "classifier":
            raise ValueError("post_hooks are only supported with algorithm 'classifier'")
        if len(set(self.post_hooks)) != len(self.post_hooks):
            raise ValueError("post_hooks contains duplicates")
        fn = self.resolved_inference_fn()
        if (self.algorithm == "mcd") != (fn in ("mcd", "mcd_full")):
            raise ValueError(f"inference_fn {fn!r} does not fit algorithm {self.algorithm!r}")
        return self

    def resolved_inference_fn(self) -> str:
        if self.inference_fn is not None:
            return self.inference_fn
        return "mcd" if self.algorithm == "mcd" else "default"


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return ExperimentConfig.model_validate(raw)
    except pydantic.ValidationError as exc:
        problems = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            problems.append(f"  {loc}: {err['msg']}")
        raise ConfigError(f"{source}: invalid config\n" + "\n".join(problems)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2) + "\n"
