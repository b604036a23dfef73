"""One-sided cyclic Jacobi SVD and the spectral losses built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .tensor import Tensor, custom_op

ROTATION_TOL = 1e-12
MAX_SWEEPS = 100


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``x = u @ diag(sigma) @ v.T`` with ``r = min(m, n)`` columns."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def _as_matrix(x) -> np.ndarray:
    a = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"svd expects a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("svd input contains non-finite entries")
    return a


def _jacobi_tall(a: np.ndarray):
    """Orthogonalize the columns of a tall matrix (m >= n) by plane rotations.

    Returns (w, v) with ``a @ v == w.T`` where the rows of ``w`` are mutually
    orthogonal and ``v`` is a product of rotations.
    """
    n = a.shape[1]
    w = a.T.copy()  # rows are the working columns
    v = np.eye(n)  # rows of v track the same rotations as rows of w
    for _ in range(MAX_SWEEPS):
        rotated = False
        for i in range(n - 1):
            wi = w[i]
            for j in range(i + 1, n):
                wj = w[j]
                alpha = wi @ wi
                beta = wj @ wj
                gamma = wi @ wj
                # a column whose squared norm underflows is already negligible
                if gamma == 0.0 or alpha == 0.0 or beta == 0.0 or abs(gamma) <= ROTATION_TOL * math.sqrt(alpha) * math.sqrt(beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                # hypot avoids overflowing zeta**2 when gamma is tiny
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                wi_old = wi.copy()
                wi[:] = c * wi_old - s * wj
                wj[:] = s * wi_old + c * wj
                vi_old = v[i].copy()
                v[i] = c * vi_old - s * v[j]
                v[j] = s * vi_old + c * v[j]
        if not rotated:
            break
    return w, v.T


def _complete_basis(u: np.ndarray, filled: np.ndarray) -> np.ndarray:
    """Replace the unfilled columns of ``u`` with orthonormal complements."""
    m = u.shape[0]
    for j in np.flatnonzero(~filled):
        basis = u[:, filled]
        best, best_norm = None, -1.0
        for e in np.eye(m):
            r = e - basis @ (basis.T @ e)
            r = r - basis @ (basis.T @ r)
            norm = np.linalg.norm(r)
            if norm > best_norm + 1e-12:
                best, best_norm = r, norm
        u[:, j] = best / best_norm
        filled[j] = True
    return u


def svd(x) -> SvdResult:
    """Thin singular value decomposition by one-sided cyclic Jacobi.

    Singular values are sorted in descending order. Each column of ``u`` is
    signed so that its largest-magnitude entry is non-negative, which makes
    the factors deterministic for a given input.
    """
    a = _as_matrix(x)
    m, n = a.shape
    transposed = m < n
    if transposed:
        a = a.T
        m, n = n, m
    w, v = _jacobi_tall(a)
    sigma = np.sqrt(np.einsum("ij,ij->i", w, w))
    order = np.argsort(-sigma, kind="stable")
    sigma, w, v = sigma[order], w[order], v[:, order]

    tiny = max(m, n) * np.finfo(np.float64).eps * (sigma[0] if sigma.size else 0.0)
    filled = sigma > tiny
    u = np.zeros((m, n))
    u[:, filled] = (w[filled] / sigma[filled, None]).T
    if not filled.all():
        u = _complete_basis(u, filled)

    if transposed:
        u, v = v, u
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[idx, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return SvdResult(u=u * signs, sigma=sigma, v=v * signs)


def singular_values(x) -> np.ndarray:
    return svd(x).sigma


def nuclear_norm(x: Tensor) -> Tensor:
    """Sum of singular values. Gradient ``u @ v.T`` (distinct, positive sigma)."""
    res = svd(x)
    return custom_op(res.sigma.sum(), (x,), lambda g: (float(g) * (res.u @ res.v.T),), "nuclear_norm")


def topk_sq_singular(x: Tensor, k: int) -> Tensor:
    """Sum of the ``k`` largest squared singular values."""
    r = min(x.shape) if x.ndim == 2 else 0
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= r:
        raise ValidationError(f"k must be an integer in [1, {r}], got {k!r}")
    res = svd(x)
    u, s, v = res.u[:, :k], res.sigma[:k], res.v[:, :k]

    def grad_fn(g):
        return (float(g) * 2.0 * (u * s) @ v.T,)

    return custom_op(np.sum(s * s), (x,), grad_fn, "topk_sq_singular")
