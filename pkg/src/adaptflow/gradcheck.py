"""Finite-difference checks of every loss and special gradient.

Each case draws random small inputs in [-2, 2], computes the analytic
gradient through the autodiff graph and compares it with central
differences (h = 1e-6). The error measure is the elementwise maximum of
``|a - fd| / max(|a|, |fd|, 1e-8)``.

Central differences at this step carry ~1e-10 absolute roundoff, so an
instance whose numeric gradient has a nonzero entry smaller than
``MIN_ENTRY`` is redrawn, in the same way spectral cases redraw matrices
with singular-value gaps below 0.1.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .hooks.adaptation import discrepancy
from .modules import Linear, ReLU, Sequential
from .spectral import nuclear_norm, singular_values, topk_sq_singular
from .tensor import Tensor

STEP = 1e-6
TOLERANCE = 1e-4
INSTANCES = 20
MIN_ENTRY = 1e-6
MAX_REDRAWS = 1000
CORRUPT_ENV = "ADAPTFLOW_GRADCHECK_CORRUPT"


def numerical_grad(f: Callable[[], float], arr: np.ndarray, h: float = STEP) -> np.ndarray:
    """Central differences of ``f`` with respect to ``arr`` (perturbed in place)."""
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _uniform(rng, *shape):
    return rng.uniform(-2.0, 2.0, shape)


def _gapped(rng, shape, transform=lambda a: a, gap=0.1):
    """Draw until the transformed matrix has singular values at least ``gap`` apart."""
    while True:
        a = _uniform(rng, *shape)
        s = singular_values(transform(a))
        if np.all(np.diff(s) <= -gap) and s[-1] >= gap:
            return a


def _single_input(fn, x: np.ndarray):
    """Analytic and numeric gradient of scalar ``fn(Tensor)`` w.r.t. ``x``."""
    t = Tensor(x, requires_grad=True)
    fn(t).backward()

    def value():
        with T.no_grad():
            return fn(Tensor(x)).item()

    return [t.grad], [numerical_grad(value, x)]


def case_cross_entropy(rng):
    labels = rng.integers(0, 3, 5)
    return _single_input(lambda z: T.cross_entropy_mean(z, labels), _uniform(rng, 5, 3))


def case_bce(rng):
    targets = rng.integers(0, 2, (6, 1)).astype(float)
    return _single_input(lambda z: T.bce_with_logits_mean(z, targets), _uniform(rng, 6, 1))


def case_l2_norm(rng):
    return _single_input(T.l2_norm, _uniform(rng, 3, 4))


def case_softmax(rng):
    w = _uniform(rng, 4, 3)
    return _single_input(lambda z: T.sum_all(T.softmax_rows(z) * Tensor(w)), _uniform(rng, 4, 3))


def case_linear_relu_ce(rng):
    x = _uniform(rng, 5, 3)
    labels = rng.integers(0, 3, 5)
    model = Sequential(Linear(3, 4, rng), ReLU(), Linear(4, 3, rng))
    params = model.parameters()
    loss = lambda: T.cross_entropy_mean(model(Tensor(x)), labels)
    loss().backward()

    def value():
        with T.no_grad():
            return loss().item()

    return [p.grad for p in params], [numerical_grad(value, p.data) for p in params]


def case_grad_reverse(rng, lam=0.7):
    w = _uniform(rng, 2, 3)
    x = _uniform(rng, 2, 3)
    t = Tensor(x, requires_grad=True)
    T.sum_all(T.grad_reverse(t, lam) * Tensor(w)).backward()

    def value():
        return float(np.sum(x * w))

    # the reversal layer's backward is -lam times the forward derivative
    return [t.grad], [-lam * numerical_grad(value, x)]


def case_nuclear_norm(rng):
    return _single_input(nuclear_norm, _gapped(rng, (4, 3)))


def _bsp(k):
    def case(rng):
        return _single_input(lambda f: topk_sq_singular(f, k), _gapped(rng, (6, 4)))
    return case


def case_bnm(rng):
    softmax = lambda a: T._softmax(a)
    z = _gapped(rng, (6, 3), softmax)
    return _single_input(lambda t: nuclear_norm(T.softmax_rows(t)) * (-1.0 / t.shape[0]), z)


def case_mcd_discrepancy(rng):
    z1, z2 = _uniform(rng, 5, 3), _uniform(rng, 5, 3)
    t1, t2 = Tensor(z1, requires_grad=True), Tensor(z2, requires_grad=True)
    discrepancy(t1, t2).backward()

    def value():
        with T.no_grad():
            return discrepancy(Tensor(z1), Tensor(z2)).item()

    return [t1.grad, t2.grad], [numerical_grad(value, z1), numerical_grad(value, z2)]


def _dann(lam):
    def case(rng):
        G = Sequential(Linear(2, 4, rng), ReLU())
        C = Linear(4, 3, rng)
        D = Sequential(Linear(4, 4, rng), ReLU(), Linear(4, 1, rng))
        xs, xt = _uniform(rng, 4, 2), _uniform(rng, 4, 2)
        labels = rng.integers(0, 3, 4)
        ones, zeros = np.ones((4, 1)), np.zeros((4, 1))

        def parts(reverse):
            fs, ft = G(Tensor(xs)), G(Tensor(xt))
            c_loss = T.cross_entropy_mean(C(fs), labels)
            if reverse:
                fs, ft = T.grad_reverse(fs, lam), T.grad_reverse(ft, lam)
            domain = T.bce_with_logits_mean(D(fs), ones) + T.bce_with_logits_mean(D(ft), zeros)
            return c_loss, domain

        c_loss, domain = parts(reverse=True)
        (c_loss + domain).backward()

        def value(which):
            def f():
                with T.no_grad():
                    c, d = parts(reverse=False)
                return {"c": c.item(), "d": d.item(), "total": c.item() + d.item()}[which]
            return f

        analytic, numeric = [], []
        for p in G.parameters():
            # through the reversal layer the domain term's gradient is scaled by -lam
            numeric.append(numerical_grad(value("c"), p.data) - lam * numerical_grad(value("d"), p.data))
            analytic.append(p.grad)
        for p in C.parameters() + D.parameters():
            numeric.append(numerical_grad(value("total"), p.data))
            analytic.append(p.grad)
        return analytic, numeric
    return case


CASES: dict[str, Callable] = {
    "cross_entropy": case_cross_entropy,
    "bce_with_logits": case_bce,
    "l2_norm": case_l2_norm,
    "softmax_rows": case_softmax,
    "linear_relu_cross_entropy": case_linear_relu_ce,
    "grad_reverse": case_grad_reverse,
    "nuclear_norm": case_nuclear_norm,
    "bsp_k1": _bsp(1),
    "bsp_k2": _bsp(2),
    "bnm": case_bnm,
    "mcd_discrepancy": case_mcd_discrepancy,
    "dann_total_lambda_0.5": _dann(0.5),
    "dann_total_lambda_1": _dann(1.0),
}


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    redrawn: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= TOLERANCE


def run_gradcheck(seed: int = 0, instances: int = INSTANCES, names=None, corrupt: str | None = None) -> list[CheckResult]:
    """Run every registered case; ``corrupt`` scales one case's analytic gradient by 1.01."""
    corrupt = corrupt if corrupt is not None else os.environ.get(CORRUPT_ENV) or None
    results = []
    for idx, name in enumerate(names or CASES):
        rng = np.random.default_rng([seed, idx])
        worst, accepted, redrawn = 0.0, 0, 0
        while accepted < instances:
            analytic, numeric = CASES[name](rng)
            if any(np.any((n != 0) & (np.abs(n) < MIN_ENTRY)) for n in numeric):
                redrawn += 1
                if redrawn > MAX_REDRAWS:
                    raise RuntimeError(f"{name}: could not draw a well-conditioned instance")
                continue
            accepted += 1
            for a, n in zip(analytic, numeric):
                if name == corrupt:
                    a = a * 1.01
                worst = max(worst, max_relative_error(a, n))
        results.append(CheckResult(name, worst, redrawn))
    return results
