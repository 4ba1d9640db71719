"""Monomial bases in scaled local coordinates."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def dim_poly(m: int, dim: int = 2) -> int:
    if dim == 1:
        return m + 1
    return (m + 1) * (m + 2) // 2


@lru_cache(maxsize=None)
def exponents(m: int, dim: int = 2) -> np.ndarray:
    """Graded lexicographic exponents: 1, x, y, x^2, xy, y^2, ..."""
    if dim == 1:
        return np.arange(m + 1)[:, None]
    out = [(d - j, j) for d in range(m + 1) for j in range(d + 1)]
    return np.array(out, dtype=np.int64)


def vandermonde(xi: np.ndarray, m: int) -> np.ndarray:
    """Monomials evaluated at local coordinates ``xi`` of shape (..., dim)."""
    xi = np.asarray(xi, dtype=float)
    e = exponents(m, xi.shape[-1])
    return np.prod(xi[..., None, :] ** e, axis=-1)


def vandermonde_grad(xi: np.ndarray, m: int) -> np.ndarray:
    """Gradients of the monomials in local coordinates: shape (..., n_mono, dim)."""
    xi = np.asarray(xi, dtype=float)
    dim = xi.shape[-1]
    e = exponents(m, dim)
    out = np.zeros(xi.shape[:-1] + (len(e), dim))
    for d in range(dim):
        ed = e.copy()
        coef = ed[:, d].astype(float)
        ed[:, d] = np.maximum(ed[:, d] - 1, 0)
        out[..., d] = coef * np.prod(xi[..., None, :] ** ed, axis=-1)
    return out
