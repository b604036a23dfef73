"""Static replay of a training step's lazy key resolution.

The real hooks run against recording stand-in models that return zero
placeholders of the right shape, so the plan follows exactly the key
resolution a real step performs without touching parameters or data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .experiment import build_adapter
from .hooks.core import ResolutionEvent, trace_resolution
from .modules import Module
from .tensor import Tensor

HIDDEN = 16


class RecordingModel(Module):
    def __init__(self, out_features: int):
        super().__init__()
        self.out_features = out_features

    def forward(self, x):
        return Tensor(np.zeros((x.shape[0], self.out_features)))


@dataclass
class Plan:
    algorithm: str
    events: list[ResolutionEvent]
    forward_counts: dict[str, int]

    def computed(self) -> list[str]:
        return [e.key for e in self.events if e.action == "compute"]

    def reused(self) -> list[str]:
        return [e.key for e in self.events if e.action == "reuse"]

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "steps": [e._asdict() for e in self.events],
            "forward_counts": self.forward_counts,
        }

    def render(self) -> str:
        lines = [f"plan for one {self.algorithm} training step"]
        for i, e in enumerate(self.events, 1):
            via = f" via {e.model}" if e.model else ""
            lines.append(f"  {i:3d}. {e.action:<7} {e.key:<34} [{e.hook}]{via}")
        lines.append("forward calls per step:")
        for name, n in self.forward_counts.items():
            lines.append(f"  {name}: {n}")
        return "\n".join(lines)


def recording_models(cfg: ExperimentConfig) -> dict:
    n = cfg.dataset.n_classes
    models = {"G": RecordingModel(HIDDEN)}
    if cfg.algorithm == "mcd":
        models["C1"] = RecordingModel(n)
        models["C2"] = RecordingModel(n)
    else:
        models["C"] = RecordingModel(n)
    if cfg.algorithm == "dann":
        models["D"] = RecordingModel(1)
    return models


def plan_experiment(cfg: ExperimentConfig) -> Plan:
    models = recording_models(cfg)
    adapter = build_adapter(cfg, models)
    bs = cfg.dataset.batch_size
    batch = {
        "src_imgs": Tensor(np.zeros((bs, 2))),
        "src_labels": np.zeros(bs, dtype=np.int64),
        "target_imgs": Tensor(np.zeros((bs, 2))),
    }
    with trace_resolution() as events:
        adapter.training_step(batch)
    return Plan(cfg.algorithm, list(events), {k: m.call_count for k, m in sorted(models.items())})
