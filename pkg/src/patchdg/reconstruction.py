"""Least-squares patch reconstruction and the global discrete space.

Each patch stores ``coeff_map = (A^T A)^{-1} A^T`` where ``A`` is the
monomial Vandermonde matrix of its sampling nodes in the patch's scaled
frame. The basis function of member ``j`` on a cell is
``v(x)^T coeff_map[:, j]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .exceptions import UnisolvenceError
from .interface import CutTopology
from .patch import ElementPatch, PatchTable
from .polynomials import dim_poly, vandermonde, vandermonde_grad


def least_squares_map(local_nodes: np.ndarray, m: int) -> np.ndarray:
    """``(A^T A)^{-1} A^T`` for nodes already in local coordinates, via QR."""
    local_nodes = np.asarray(local_nodes, dtype=float)
    if local_nodes.ndim == 1:
        local_nodes = local_nodes[:, None]
    A = vandermonde(local_nodes, m)
    if A.shape[0] < A.shape[1]:
        raise UnisolvenceError(f"{A.shape[0]} nodes cannot determine {A.shape[1]} coefficients")
    q, r = scipy.linalg.qr(A, mode="economic")
    d = np.abs(np.diag(r))
    if d.min() <= 1e-12 * d.max():
        raise UnisolvenceError("sampling nodes are not unisolvent for this degree")
    return scipy.linalg.solve_triangular(r, q.T)


@dataclass
class LocalBasis:
    patch: ElementPatch
    center: np.ndarray
    scale: float
    coeff_map: np.ndarray
    m: int

    def local(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.center) / self.scale

    def values(self, x) -> np.ndarray:
        """Basis values of all patch members at points ``x``: shape (n, N)."""
        return vandermonde(self.local(np.atleast_2d(x)), self.m) @ self.coeff_map

    def gradients(self, x) -> np.ndarray:
        """Shape (n, N, 2); chain rule through the frame scaling."""
        G = vandermonde_grad(self.local(np.atleast_2d(x)), self.m)
        return np.einsum("npd,pj->njd", G, self.coeff_map) / self.scale

    def coefficients(self, nodal_values) -> np.ndarray:
        return self.coeff_map @ np.asarray(nodal_values, dtype=float)


def fit_local_basis(patch: ElementPatch, m: int) -> LocalBasis:
    center = patch.center.copy()
    scale = patch.scale
    C = least_squares_map((patch.nodes - center) / scale, m)
    return LocalBasis(patch, center, scale, C, m)


class GlobalSpace:
    """Discrete space with one DOF per cell of ``T_h^0`` and one per cell of ``T_h^1``.

    ``dof_index[k, i]`` is the DOF of cell ``k`` on side ``i`` (``-1`` when
    ``k`` is not in ``T_h^i``). Basis data of all patches is also kept in
    padded arrays so that many cells can be evaluated in one call.
    """

    def __init__(self, topology: CutTopology, table: PatchTable):
        self.topology = topology
        self.mesh = topology.mesh
        self.table = table
        self.m = table.m
        mesh = self.mesh
        dof = np.full((mesh.n_cells, 2), -1, dtype=np.int64)
        n = 0
        for side in (0, 1):
            for k in topology.side_cells(side):
                dof[k, side] = n
                n += 1
        self.dof_index = dof
        self.n_dof = n

        unique = table.unique()
        self.bases = [fit_local_basis(p, self.m) for p in unique]
        pid = {id(p): j for j, p in enumerate(unique)}
        slot = np.full((mesh.n_cells, 2), -1, dtype=np.int64)
        for (k, side), p in table.patches.items():
            slot[k, side] = pid[id(p)]
        self.slot_basis = slot

        nmax = max(len(b.patch.members) for b in self.bases)
        P = len(self.bases)
        npoly = dim_poly(self.m)
        self.centers = np.array([b.center for b in self.bases])
        self.scales = np.array([b.scale for b in self.bases])
        self.coeffs = np.zeros((P, npoly, nmax))
        self.pdofs = np.zeros((P, nmax), dtype=np.int64)
        self.pmask = np.zeros((P, nmax), dtype=bool)
        for j, b in enumerate(self.bases):
            N = len(b.patch.members)
            self.coeffs[j, :, :N] = b.coeff_map
            self.pdofs[j, :N] = dof[b.patch.members, b.patch.side]
            self.pmask[j, :N] = True
        if (self.pdofs[self.pmask] < 0).any():
            raise UnisolvenceError("patch member without a DOF on the patch side")

    def basis(self, k: int, side: int) -> LocalBasis:
        j = self.slot_basis[k, side]
        if j < 0:
            raise IndexError(f"cell {k} has no side-{side} basis")
        return self.bases[j]

    def active_dofs(self, k: int, side: int) -> np.ndarray:
        return self.dof_index[self.basis(k, side).patch.members, side]

    # -- batched evaluation -------------------------------------------------

    def eval_batch(self, basis_ids: np.ndarray, pts: np.ndarray, grad: bool = True):
        """Values (n, q, N) and gradients (n, q, N, 2) of padded patch bases.

        ``basis_ids`` has shape (n,) and ``pts`` shape (n, q, 2).
        """
        c = self.centers[basis_ids][:, None, :]
        s = self.scales[basis_ids][:, None, None]
        xi = (pts - c) / s
        C = self.coeffs[basis_ids]
        V = vandermonde(xi, self.m)
        vals = np.einsum("nqp,npj->nqj", V, C)
        if not grad:
            return vals, None
        G = vandermonde_grad(xi, self.m)
        grads = np.einsum("nqpd,npj->nqjd", G, C) / s[..., None]
        return vals, grads

    def dump_coefficients(self, directory) -> None:
        """Write every patch's coefficient matrix to CSV (debugging aid)."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for j, b in enumerate(self.bases):
            k, side = b.patch.anchor
            np.savetxt(out / f"patch_{k}_{side}.csv", b.coeff_map, delimiter=",")


def evaluate_basis(space: GlobalSpace, cell: int, side: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Values of the active basis functions at ``x`` and their DOF indices."""
    b = space.basis(cell, side)
    return b.values(np.atleast_2d(x))[0], space.active_dofs(cell, side)


def evaluate_basis_gradient(space: GlobalSpace, cell: int, side: int, x) -> tuple[np.ndarray, np.ndarray]:
    b = space.basis(cell, side)
    return b.gradients(np.atleast_2d(x))[0], space.active_dofs(cell, side)


def evaluate_function(space: GlobalSpace, dofs: np.ndarray, cell: int, side: int, x) -> np.ndarray:
    """The discrete function with DOF vector ``dofs`` on ``(cell, side)`` at points ``x``."""
    b = space.basis(cell, side)
    return b.values(np.atleast_2d(x)) @ dofs[space.active_dofs(cell, side)]


def interpolate(space: GlobalSpace, g0, g1) -> np.ndarray:
    """DOF vector with entry ``g_i(x_K)`` for every cell ``K`` of ``T_h^i``.

    ``g0`` and ``g1`` must be evaluable at all sampling nodes of their side
    (smooth extensions of the per-side functions).
    """
    bary = space.mesh.barycenters
    u = np.zeros(space.n_dof)
    for side, g in ((0, g0), (1, g1)):
        cells = np.flatnonzero(space.dof_index[:, side] >= 0)
        u[space.dof_index[cells, side]] = np.asarray(g(bary[cells]), dtype=float)
    return u
