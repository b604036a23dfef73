"""Adapters bind models, a training hook and an inference function."""

from __future__ import annotations

from typing import Callable, Mapping

from . import tensor as T
from .containers import LRSchedulers, Models, Optimizers, SGD
from .context import Context
from .hooks.adaptation import AlgoHyperParams, BNMHook, BSPHook, ClassifierHook, DANNHook, MCDHook
from .inference import default_fn, mcd_fn

DEFAULT_OPTIMIZERS = (SGD, {"lr": 0.01})


class BaseAdapter:
    required_models: tuple[str, ...] = ()
    default_inference_fn: Callable = staticmethod(default_fn)

    def __init__(self, models: Mapping, optimizers: Optimizers | None = None,
                 lr_schedulers: LRSchedulers | None = None, inference_fn: Callable | None = None,
                 hyperparams: AlgoHyperParams | None = None, **hook_kwargs):
        self.models = Models(models).require(self.required_models)
        self.hyperparams = hyperparams or AlgoHyperParams()
        spec = Optimizers(DEFAULT_OPTIMIZERS)
        if optimizers is not None:
            spec = spec.merge(optimizers)
        self.optimizers = spec.create_with(self.models)
        self.lr_schedulers = lr_schedulers.create_with(self.optimizers) if lr_schedulers else {}
        self.inference_fn = inference_fn or type(self).default_inference_fn
        self.hook = self.init_hook(**hook_kwargs)

    def init_hook(self, **kwargs):
        raise NotImplementedError

    def training_step(self, batch: Mapping) -> dict[str, float]:
        """Run the training hook on a fresh context; returns loss values."""
        ctx = Context(self.models)
        ctx.update(batch)
        _, losses = self.hook(ctx)
        return {name: value.item() for name, value in losses.items()}

    def inference(self, imgs) -> dict:
        with T.no_grad():
            return self.inference_fn(self.models, T.as_tensor(imgs))

    def step_schedulers(self):
        for s in self.lr_schedulers.values():
            s.step()

    def learning_rates(self) -> dict[str, float]:
        return {name: opt.lr for name, opt in self.optimizers.items()}


POST_HOOKS = {
    "bsp": lambda hp: BSPHook(k=hp.bsp_k),
    "bnm": lambda hp: BNMHook(),
}
POST_WEIGHTS = {"bsp": ("BSPLoss", "bsp_weight"), "bnm": ("BNMLoss", "bnm_weight")}


class Classifier(BaseAdapter):
    """Source-only training, optionally with extra loss hooks such as BSP/BNM."""

    required_models = ("G", "C")

    def init_hook(self, post=(), weights=None):
        hp = self.hyperparams
        hooks, w = [], dict(weights or {})
        for p in post:
            if isinstance(p, str):
                loss_name, attr = POST_WEIGHTS[p]
                w.setdefault(loss_name, getattr(hp, attr))
                p = POST_HOOKS[p](hp)
            hooks.append(p)
        opts = [self.optimizers[k] for k in ("G", "C") if k in self.optimizers]
        return ClassifierHook(opts, post=hooks, weights=w or None)


class DANN(BaseAdapter):
    required_models = ("G", "C", "D")

    def init_hook(self, weights=None):
        opts = [self.optimizers[k] for k in ("G", "C", "D") if k in self.optimizers]
        return DANNHook(opts, grl_lambda=self.hyperparams.grl_lambda, weights=weights)


class MCD(BaseAdapter):
    required_models = ("G", "C1", "C2")
    default_inference_fn = staticmethod(mcd_fn)

    def init_hook(self):
        g_opts = [self.optimizers["G"]] if "G" in self.optimizers else []
        c_opts = [self.optimizers[k] for k in ("C1", "C2") if k in self.optimizers]
        return MCDHook(g_opts, c_opts, repeat=self.hyperparams.mcd_repeat)


ADAPTERS = {"classifier": Classifier, "dann": DANN, "mcd": MCD}
