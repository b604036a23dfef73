"""Hook base class, lazy feature resolution, chaining and optimization.

A hook is called as ``outputs, losses = hook(inputs, losses)``. It works
out which context keys it needs, reuses those already in ``inputs`` and
computes the rest. ``outputs`` carries only the keys it computed. Each call
is checked against the hook's declared ``loss_keys`` and ``out_keys``.
"""

from __future__ import annotations

import contextlib
import contextvars
import math
from typing import Mapping, NamedTuple, Sequence

from .. import tensor as T
from ..context import Context, extract, render_key, with_suffix
from ..errors import (
    DimensionError,
    KeyCollision,
    KeyContractViolation,
    LossCollision,
    NonFiniteLoss,
    ValidationError,
)
from ..tensor import Tensor


class ResolutionEvent(NamedTuple):
    hook: str
    action: str  # "compute" or "reuse"
    key: str
    model: str | None


_trace: contextvars.ContextVar[list | None] = contextvars.ContextVar("adaptflow_trace", default=None)


@contextlib.contextmanager
def trace_resolution():
    """Collect a :class:`ResolutionEvent` for every key a lazy hook resolves."""
    events: list[ResolutionEvent] = []
    token = _trace.set(events)
    try:
        yield events
    finally:
        _trace.reset(token)


def _record(hook, action, key, model=None):
    events = _trace.get()
    if events is not None:
        events.append(ResolutionEvent(type(hook).__name__, action, key, model))


class BaseHook:
    """Base class for every hook.

    Subclasses implement ``call`` and declare ``_loss_keys`` / ``_out_keys``.
    Hooks that build on child hooks override ``required_out_keys`` so the
    "produce or reuse" rule follows what the children would need.
    """

    def __call__(self, inputs: Mapping, losses: Mapping | None = None):
        losses = {} if losses is None else losses
        outputs, new_losses = self.call(inputs, losses)
        outputs = outputs if isinstance(outputs, Context) else Context(outputs)
        check_contract(self, inputs, outputs, new_losses)
        return outputs, new_losses

    def call(self, inputs: Mapping, losses: Mapping):
        raise NotImplementedError

    @property
    def loss_keys(self) -> set[str]:
        return set(self._loss_keys())

    @property
    def out_keys(self) -> set[str]:
        return set(self._out_keys())

    def _loss_keys(self):
        return []

    def _out_keys(self):
        return []

    def required_out_keys(self, inputs: Mapping) -> set[str]:
        """Declared keys that must be either produced or already present."""
        return self.out_keys

    def __repr__(self):
        return f"{type(self).__name__}()"


def check_contract(hook: BaseHook, inputs: Mapping, outputs: Mapping, losses: Mapping):
    produced = set(outputs)
    declared = hook.out_keys
    name = type(hook).__name__
    extra = produced - declared
    if extra:
        raise KeyContractViolation(f"{name} produced undeclared keys", declared, produced)
    overlap = produced & set(inputs)
    if overlap:
        raise KeyCollision(sorted(overlap)[0])
    skipped = hook.required_out_keys(inputs) - produced - set(inputs)
    if skipped:
        raise KeyContractViolation(
            f"{name} neither produced nor reused {sorted(skipped)}", declared, produced
        )
    if set(losses) != hook.loss_keys:
        raise KeyContractViolation(f"{name} loss names differ from loss_keys", hook.loss_keys, set(losses))
    for loss_name, value in losses.items():
        if not isinstance(value, Tensor) or value.size != 1:
            raise DimensionError(f"{name}: loss {loss_name!r} is not a scalar tensor")


def run_hook(hook: BaseHook, inputs: Mapping, losses: Mapping | None = None):
    return hook(inputs, losses)


def _domain_key(domain: str, suffixes: Sequence[str]) -> str:
    return render_key(domain, "imgs", suffixes)


class FeaturesHook(BaseHook):
    """Compute ``{domain}_imgs_features = model(domain_imgs)`` where missing."""

    def __init__(self, model_name: str = "G", domains: Sequence[str] = ("src", "target")):
        self.model_name = model_name
        self.domains = tuple(domains)
        for d in self.domains:
            _domain_key(d, ())

    def call(self, inputs, losses):
        outputs = Context()
        for d in self.domains:
            key = _domain_key(d, ("features",))
            if key in inputs:
                _record(self, "reuse", key)
                continue
            [imgs] = extract([inputs], [_domain_key(d, ())], kind="tensor")
            [model] = extract([inputs], [self.model_name], kind="model")
            outputs[key] = model(imgs)
            _record(self, "compute", key, self.model_name)
        return outputs, {}

    def _out_keys(self):
        return [_domain_key(d, ("features",)) for d in self.domains]

    def __repr__(self):
        return f"FeaturesHook(model_name={self.model_name!r}, domains={list(self.domains)})"


class LogitsHook(BaseHook):
    """Compute ``{domain}_imgs_features_logits``; features only when needed."""

    def __init__(self, model_name: str = "C", domains: Sequence[str] = ("src", "target"), features_model: str = "G"):
        self.model_name = model_name
        self.domains = tuple(domains)
        self.f_hooks = {d: FeaturesHook(features_model, [d]) for d in self.domains}

    def call(self, inputs, losses):
        outputs = Context()
        for d in self.domains:
            key = _domain_key(d, ("features", "logits"))
            if key in inputs:
                _record(self, "reuse", key)
                continue
            f_out, _ = self.f_hooks[d](inputs, losses)
            outputs.update(f_out)
            [features] = extract([outputs, inputs], [_domain_key(d, ("features",))])
            [model] = extract([inputs], [self.model_name], kind="model")
            outputs[key] = model(features)
            _record(self, "compute", key, self.model_name)
        return outputs, {}

    def _out_keys(self):
        keys = [_domain_key(d, ("features", "logits")) for d in self.domains]
        for h in self.f_hooks.values():
            keys.extend(h.out_keys)
        return keys

    def required_out_keys(self, inputs):
        needed = set()
        for d in self.domains:
            logits_key = _domain_key(d, ("features", "logits"))
            needed.add(logits_key)
            if logits_key not in inputs:
                needed |= self.f_hooks[d].out_keys
        return needed


class DetachHook(BaseHook):
    """Emit ``{key}_detached`` for each key, cut from the gradient graph."""

    def __init__(self, keys: Sequence[str]):
        self.keys = tuple(keys)
        self._targets = {k: with_suffix(k, "detached") for k in self.keys}

    def call(self, inputs, losses):
        outputs = Context()
        for key, target in self._targets.items():
            if target in inputs:
                _record(self, "reuse", target)
                continue
            [value] = extract([inputs], [key], kind="tensor")
            outputs[target] = T.detach(value)
            _record(self, "compute", target)
        return outputs, {}

    def _out_keys(self):
        return list(self._targets.values())


class ChainHook(BaseHook):
    """Run hooks in order; each sees the inputs plus all earlier outputs."""

    def __init__(self, *hooks: BaseHook):
        self.hooks = hooks
        seen: set[str] = set()
        dupes: set[str] = set()
        for h in hooks:
            dupes |= seen & h.loss_keys
            seen |= h.loss_keys
        if dupes:
            raise LossCollision(dupes)

    def call(self, inputs, losses):
        ctx = Context(inputs)
        outputs = Context()
        all_losses: dict[str, Tensor] = {}
        for h in self.hooks:
            out, new_losses = h(ctx, {**losses, **all_losses})
            for key, value in out.items():
                outputs[key] = value
                ctx[key] = value
            dupes = set(all_losses) & set(new_losses)
            if dupes:
                raise LossCollision(dupes)
            all_losses.update(new_losses)
        return outputs, all_losses

    def _loss_keys(self):
        return [k for h in self.hooks for k in h.loss_keys]

    def _out_keys(self):
        return [k for h in self.hooks for k in h.out_keys]

    def required_out_keys(self, inputs):
        available = set(inputs)
        needed: set[str] = set()
        for h in self.hooks:
            r = h.required_out_keys(available)
            needed |= r
            available |= r
        return needed

    def __repr__(self):
        return f"ChainHook({', '.join(map(repr, self.hooks))})"


class OptimizerHook(BaseHook):
    """Run ``hook``, then take one optimizer step on the weighted loss sum.

    Losses with weight 0 are left out of the total entirely, so parameters
    reachable only through them receive no gradient and are not updated.
    """

    def __init__(self, hook: BaseHook, optimizers: Sequence, weights: Mapping[str, float] | None = None,
                 total_name: str = "total_loss"):
        self.hook = hook
        self.optimizers = list(optimizers)
        self.weights = dict(weights or {})
        self.total_name = total_name
        unknown = set(self.weights) - hook.loss_keys
        if unknown:
            raise ValidationError(f"weights given for unknown losses {sorted(unknown)}")
        if total_name in hook.loss_keys:
            raise LossCollision({total_name})

    def call(self, inputs, losses):
        outputs, inner = self.hook(inputs, losses)
        if not inner:
            raise ValidationError(f"{self.hook!r} produced no losses to optimize")
        total = None
        for name, loss in inner.items():
            w = float(self.weights.get(name, 1.0))
            if w == 0.0:
                continue
            term = loss if w == 1.0 else loss * w
            total = term if total is None else total + term
        if total is None:
            total = Tensor(0.0)
        if not math.isfinite(total.item()):
            raise NonFiniteLoss({k: v.item() for k, v in inner.items()})
        for opt in self.optimizers:
            opt.zero_grad()
        total.backward()
        for opt in self.optimizers:
            opt.step()
        reported = {k: T.detach(v) for k, v in inner.items()}
        reported[self.total_name] = T.detach(total)
        return outputs, reported

    def _loss_keys(self):
        return list(self.hook.loss_keys) + [self.total_name]

    def _out_keys(self):
        return self.hook.out_keys

    def required_out_keys(self, inputs):
        return self.hook.required_out_keys(inputs)

    def __repr__(self):
        return f"OptimizerHook({self.hook!r}, n_optimizers={len(self.optimizers)})"
