"""Linear solvers for the symmetric positive definite DG system."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import InvalidParameterError, SolverError

logger = logging.getLogger(__name__)


@dataclass
class Solution:
    values: np.ndarray
    method: str
    residual: float
    iterations: int = 0
    stats: dict = field(default_factory=dict)


def _as_matrix(system):
    if hasattr(system, "matrix"):
        return sp.csr_matrix(system.matrix), np.asarray(system.rhs, dtype=float)
    A, b = system
    return sp.csr_matrix(A), np.asarray(b, dtype=float)


def _relres(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def pcg(A: sp.csr_matrix, b: np.ndarray, tol: float = 1e-10, maxiter: int | None = None):
    """Jacobi-preconditioned conjugate gradients.

    Raises :class:`SolverError` on non-positive curvature, which means the
    matrix is not positive definite.
    """
    n = A.shape[0]
    maxiter = maxiter or 10 * n
    d = A.diagonal()
    if (d <= 0).any():
        raise SolverError("non-positive diagonal entry: matrix is not SPD; increase the penalty eta")
    Minv = 1.0 / d
    x = np.zeros(n)
    r = b.copy()
    nb = np.linalg.norm(b)
    if nb == 0:
        return x, 0
    z = Minv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0:
            raise SolverError("conjugate gradient breakdown (p^T A p <= 0): matrix is indefinite; increase eta")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * nb:
            return x, it
        z = Minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"conjugate gradient did not converge in {maxiter} iterations")


def solve(system, method: str = "direct", tol: float | None = None) -> Solution:
    """Solve ``M x = rhs`` by sparse LU factorization or preconditioned CG."""
    A, b = _as_matrix(system)
    if not np.all(np.isfinite(b)):
        raise SolverError("right-hand side is not finite")
    if method == "direct":
        tol = 1e-8 if tol is None else tol
        try:
            lu = spla.splu(A.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"sparse factorization failed ({exc}); matrix is singular, increase eta") from exc
        x = lu.solve(b)
        # one step of iterative refinement
        x += lu.solve(b - A @ x)
        res = _relres(A, x, b)
        stats = {"fill": int(lu.L.nnz + lu.U.nnz)}
        if not np.all(np.isfinite(x)) or res > tol:
            raise SolverError(f"direct solve residual {res:.3e} exceeds {tol:.1e}; increase eta")
        return Solution(x, "direct", res, 0, stats)
    if method == "cg":
        tol = 1e-10 if tol is None else tol
        x, it = pcg(A, b, tol)
        return Solution(x, "cg", _relres(A, x, b), it)
    raise InvalidParameterError(f"unknown solver {method!r}; use 'direct' or 'cg'")


@dataclass
class ConditionEstimate:
    lambda_max: float
    lambda_min: float

    @property
    def condition(self) -> float:
        return self.lambda_max / self.lambda_min if self.lambda_min > 0 else math.inf


def condition_estimate(system) -> ConditionEstimate:
    """Extreme eigenvalues by Lanczos (largest) and shift-invert Lanczos (smallest)."""
    A, _ = _as_matrix(system)
    n = A.shape[0]
    if n <= 200:
        ev = np.linalg.eigvalsh(A.toarray())
        return ConditionEstimate(float(ev[-1]), float(ev[0]))
    lmax = spla.eigsh(A, k=1, which="LA", return_eigenvectors=False, tol=1e-6)[0]
    lmin = spla.eigsh(A.tocsc(), k=1, sigma=0.0, which="LM", return_eigenvectors=False, tol=1e-6)[0]
    est = ConditionEstimate(float(lmax), float(lmin))
    logger.info("lambda_max=%.3e lambda_min=%.3e cond=%.3e", est.lambda_max, est.lambda_min, est.condition)
    return est
