"""Algorithm hooks: classifier training, L2 feature norm, BSP, BNM, DANN, MCD."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import tensor as T
from ..context import Context, extract, render_key
from ..errors import ValidationError
from ..spectral import nuclear_norm, topk_sq_singular
from .core import BaseHook, ChainHook, DetachHook, FeaturesHook, LogitsHook, OptimizerHook, _record


@dataclass(frozen=True)
class AlgoHyperParams:
    grl_lambda: float = 1.0
    bsp_k: int = 1
    bsp_weight: float = 1e-4
    bnm_weight: float = 1.0
    mcd_repeat: int = 4

    def __post_init__(self):
        for name in ("grl_lambda", "bsp_weight", "bnm_weight"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.grl_lambda <= 0:
            raise ValidationError("grl_lambda must be positive")
        for name in ("bsp_k", "mcd_repeat"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValidationError(f"{name} must be an integer >= 1")


def _key(domain, *suffixes):
    return render_key(domain, "imgs", suffixes)


class L2NormHook(BaseHook):
    """Frobenius norm of the source features, reported as ``L2NormLoss``."""

    def __init__(self):
        self.loss_name = "L2NormLoss"
        self.f_hook = FeaturesHook(model_name="G", domains=["src"])

    def call(self, inputs, losses):
        outputs = self.f_hook(inputs, losses)[0]
        [features] = extract([outputs, inputs], ["src_imgs_features"])
        return outputs, {self.loss_name: T.l2_norm(features)}

    def _loss_keys(self):
        return [self.loss_name]

    def _out_keys(self):
        return self.f_hook.out_keys


class CLossHook(BaseHook):
    """Cross-entropy of the source logits against ``src_labels``."""

    def __init__(self, loss_name: str = "c_loss", model_name: str = "C"):
        self.loss_name = loss_name
        self.l_hook = LogitsHook(model_name, ["src"])

    def call(self, inputs, losses):
        outputs = self.l_hook(inputs, losses)[0]
        logits, labels = extract([outputs, inputs], ["src_imgs_features_logits", "src_labels"])
        return outputs, {self.loss_name: T.cross_entropy_mean(logits, labels)}

    def _loss_keys(self):
        return [self.loss_name]

    def _out_keys(self):
        return self.l_hook.out_keys

    def required_out_keys(self, inputs):
        return self.l_hook.required_out_keys(inputs)


class BSPHook(BaseHook):
    """Batch spectral penalty: top-k squared singular values of each feature batch."""

    def __init__(self, k: int = 1, domains: Sequence[str] = ("src", "target"), loss_name: str = "BSPLoss"):
        self.k = k
        self.domains = tuple(domains)
        self.loss_name = loss_name
        self.f_hook = FeaturesHook("G", self.domains)

    def call(self, inputs, losses):
        outputs = self.f_hook(inputs, losses)[0]
        feats = extract([outputs, inputs], [_key(d, "features") for d in self.domains])
        total = None
        for f in feats:
            term = topk_sq_singular(f, self.k)
            total = term if total is None else total + term
        return outputs, {self.loss_name: total}

    def _loss_keys(self):
        return [self.loss_name]

    def _out_keys(self):
        return self.f_hook.out_keys


class BNMHook(BaseHook):
    """Negative batch nuclear norm of the softmax predictions, divided by batch size."""

    def __init__(self, domains: Sequence[str] = ("target",), loss_name: str = "BNMLoss"):
        self.domains = tuple(domains)
        self.loss_name = loss_name
        self.l_hook = LogitsHook("C", self.domains)

    def call(self, inputs, losses):
        outputs = self.l_hook(inputs, losses)[0]
        logits = extract([outputs, inputs], [_key(d, "features", "logits") for d in self.domains])
        total = None
        for z in logits:
            term = nuclear_norm(T.softmax_rows(z)) * (-1.0 / z.shape[0])
            total = term if total is None else total + term
        return outputs, {self.loss_name: total}

    def _loss_keys(self):
        return [self.loss_name]

    def _out_keys(self):
        return self.l_hook.out_keys

    def required_out_keys(self, inputs):
        return self.l_hook.required_out_keys(inputs)


class DomainLossHook(BaseHook):
    """Discriminator loss on gradient-reversed features: source is 1, target is 0."""

    def __init__(self, grl_lambda: float = 1.0, model_name: str = "D"):
        self.grl_lambda = grl_lambda
        self.model_name = model_name
        self.f_hooks = {d: FeaturesHook("G", [d]) for d in ("src", "target")}

    def call(self, inputs, losses):
        outputs = Context()
        new_losses = {}
        for d, label in (("src", 1.0), ("target", 0.0)):
            key = _key(d, "features", "dlogits")
            if key in inputs:
                _record(self, "reuse", key)
            else:
                outputs.update(self.f_hooks[d](inputs, losses)[0])
                [features] = extract([outputs, inputs], [_key(d, "features")])
                [model] = extract([inputs], [self.model_name], kind="model")
                outputs[key] = model(T.grad_reverse(features, self.grl_lambda))
                _record(self, "compute", key, self.model_name)
            [dlogits] = extract([outputs, inputs], [key])
            targets = np.full(dlogits.shape, label)
            new_losses[f"{d}_domain_loss"] = T.bce_with_logits_mean(dlogits, targets)
        return outputs, new_losses

    def _loss_keys(self):
        return ["src_domain_loss", "target_domain_loss"]

    def _out_keys(self):
        keys = [_key(d, "features", "dlogits") for d in ("src", "target")]
        for h in self.f_hooks.values():
            keys.extend(h.out_keys)
        return keys

    def required_out_keys(self, inputs):
        needed = set()
        for d in ("src", "target"):
            key = _key(d, "features", "dlogits")
            needed.add(key)
            if key not in inputs:
                needed |= self.f_hooks[d].out_keys
        return needed


class ClassifierHook(OptimizerHook):
    """Source cross-entropy plus any ``pre``/``post`` hooks, one optimizer step."""

    def __init__(self, optimizers, pre: Sequence[BaseHook] = (), post: Sequence[BaseHook] = (),
                 weights=None):
        super().__init__(ChainHook(*pre, CLossHook(), *post), optimizers, weights)


class DANNHook(OptimizerHook):
    """Domain-adversarial training of G, C and D in a single step."""

    def __init__(self, optimizers, grl_lambda: float = 1.0, weights=None):
        super().__init__(ChainHook(CLossHook(), DomainLossHook(grl_lambda)), optimizers, weights)


def discrepancy(logits1: T.Tensor, logits2: T.Tensor) -> T.Tensor:
    """Mean absolute difference between the two branches' softmax outputs."""
    return T.mean_all(T.abs_(T.softmax_rows(logits1) - T.softmax_rows(logits2)))


class _BranchHook(BaseHook):
    """Shared plumbing for hooks that feed one feature key to C1 and C2."""

    def __init__(self, domain: str, detach: bool):
        self.features_key = _key(domain, "features")
        hooks = [FeaturesHook("G", [domain])]
        if detach:
            hooks.append(DetachHook([self.features_key]))
            self.features_key = _key(domain, "features", "detached")
        self.pre = ChainHook(*hooks)

    def branch_logits(self, inputs, losses):
        outputs = self.pre(inputs, losses)[0]
        [features] = extract([outputs, inputs], [self.features_key])
        c1, c2 = extract([inputs], ["C1", "C2"], kind="model")
        return outputs, c1(features), c2(features)

    def _out_keys(self):
        return self.pre.out_keys

    def required_out_keys(self, inputs):
        return self.pre.required_out_keys(inputs)


class BranchCLossHook(_BranchHook):
    def __init__(self, loss_names=("c_loss1", "c_loss2"), detach: bool = False):
        super().__init__("src", detach)
        self.loss_names = tuple(loss_names)

    def call(self, inputs, losses):
        outputs, z1, z2 = self.branch_logits(inputs, losses)
        [labels] = extract([inputs], ["src_labels"])
        return outputs, {
            self.loss_names[0]: T.cross_entropy_mean(z1, labels),
            self.loss_names[1]: T.cross_entropy_mean(z2, labels),
        }

    def _loss_keys(self):
        return list(self.loss_names)


class DiscrepancyHook(_BranchHook):
    def __init__(self, loss_name: str = "discrepancy", detach: bool = False, domain: str = "target"):
        super().__init__(domain, detach)
        self.loss_name = loss_name

    def call(self, inputs, losses):
        outputs, z1, z2 = self.branch_logits(inputs, losses)
        return outputs, {self.loss_name: discrepancy(z1, z2)}

    def _loss_keys(self):
        return [self.loss_name]


class RepeatHook(BaseHook):
    """Run ``hook`` ``repeat`` times, each on a scratch copy of the inputs.

    Keys starting with any of ``fresh_prefixes`` are dropped from the scratch
    copy so they are recomputed every repetition. Nothing is emitted; the
    losses of the last repetition are reported.
    """

    def __init__(self, hook: BaseHook, repeat: int, fresh_prefixes: Sequence[str] = ()):
        if repeat < 1:
            raise ValidationError("repeat must be >= 1")
        self.hook = hook
        self.repeat = repeat
        self.fresh_prefixes = tuple(fresh_prefixes)

    def call(self, inputs, losses):
        last = {}
        for _ in range(self.repeat):
            scratch = Context({k: v for k, v in inputs.items() if not k.startswith(self.fresh_prefixes)})
            _, last = self.hook(scratch, losses)
        return Context(), last

    def _loss_keys(self):
        return self.hook.loss_keys

    def required_out_keys(self, inputs):
        return set()


class MCDHook(ChainHook):
    """Three-phase maximum classifier discrepancy step.

    A: G, C1, C2 minimize source cross-entropy on both branches.
    B: C1, C2 minimize source cross-entropy minus target discrepancy, with
       G's features detached.
    C: G minimizes target discrepancy, ``repeat`` times.
    """

    def __init__(self, g_opts, c_opts, repeat: int = 4):
        phase_a = OptimizerHook(BranchCLossHook(), list(g_opts) + list(c_opts), total_name="total_loss_A")
        phase_b = OptimizerHook(
            ChainHook(
                BranchCLossHook(("c_loss1_B", "c_loss2_B"), detach=True),
                DiscrepancyHook("discrepancy_B", detach=True),
            ),
            c_opts,
            weights={"discrepancy_B": -1.0},
            total_name="total_loss_B",
        )
        phase_c = RepeatHook(
            OptimizerHook(DiscrepancyHook("discrepancy_C"), g_opts, total_name="total_loss_C"),
            repeat,
            fresh_prefixes=("target_imgs_features",),
        )
        super().__init__(phase_a, phase_b, phase_c)
