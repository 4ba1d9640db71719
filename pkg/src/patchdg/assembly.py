"""Symmetric interior-penalty assembly for the two-sided reconstructed space.

Bilinear form, per unit of work:

* volume:     int_{K^i} beta_i grad u . grad v
* faces/Gamma: - int ([u] {beta dv/dn} + [v] {beta du/dn}) + (eta_e/h) int [u][v]

with ``h = |e|`` on (cut) faces and ``h = h_K`` on the interface piece of a
cut cell. With the default "beta" weighting a face inside subdomain i uses
``eta_e = eta * beta_i / max(beta)`` and the interface uses ``eta``; the
"uniform" weighting uses ``eta`` everywhere. Jumps are taken along the
normal of the "plus" trace; on the interface the plus trace is the side-1
part, giving ``[v] = v1 - v0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import AssemblyError, InvalidParameterError
from .integration import FaceGroup, IntegrationItems, VolumeGroup, build_items
from .interface import CutTopology
from .reconstruction import GlobalSpace

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray], np.ndarray]

CHUNK = 512


def _pair(v):
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise InvalidParameterError("expected one entry per side")
        return tuple(v)
    return (v, v)


@dataclass
class ProblemData:
    """Coefficients and data of the interface problem.

    ``f``, ``g`` and ``exact`` take one callable per side (a single callable
    is used for both). ``a(x)`` is the prescribed jump ``u1 - u0`` on the
    interface and ``b(x, n)`` the flux jump
    ``beta1 du1/dn - beta0 du0/dn`` for the normal ``n`` pointing into
    subdomain 0; it receives the discrete normals at quadrature points.
    ``breaklines`` are lines ``((nx, ny), c)`` with ``n . x = c`` along
    which ``f`` or the exact solution has a kink; volume quadrature is
    split there.
    """

    beta: tuple[float, float]
    f: Sequence[Field] | Field
    g: Sequence[Field] | Field
    a: Field = field(default=lambda x: np.zeros(len(x)))
    b: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(default=lambda x, n: np.zeros(len(x)))
    exact: Optional[Sequence[Field]] = None
    exact_grad: Optional[Sequence[Callable]] = None
    breaklines: Sequence[tuple] = ()

    def __post_init__(self):
        self.beta = tuple(float(b) for b in _pair(self.beta))
        if min(self.beta) <= 0:
            raise InvalidParameterError(f"beta must be positive, got {self.beta}")
        self.f = _pair(self.f)
        self.g = _pair(self.g)
        if self.exact is not None:
            self.exact = _pair(self.exact)
        if self.exact_grad is not None:
            self.exact_grad = _pair(self.exact_grad)


WEIGHTINGS = ("beta", "uniform")


@dataclass
class PenaltyConfig:
    eta: Optional[float] = None
    weighting: str = "beta"

    def __post_init__(self):
        if self.weighting not in WEIGHTINGS:
            raise InvalidParameterError(f"unknown penalty weighting {self.weighting!r}; use one of {WEIGHTINGS}")
        if self.eta is not None and self.eta < 0:
            raise InvalidParameterError("penalty must be nonnegative")

    def value(self, m: int, beta: Sequence[float]) -> float:
        if self.eta is not None:
            return float(self.eta)
        return 10.0 * max(m, 1) ** 2 * max(beta)

    def face_weights(self, grp: FaceGroup, sl: slice, beta) -> np.ndarray:
        """Multiplier of ``eta`` for each item of a face group slice."""
        beta = np.asarray(beta, dtype=float)
        n = len(grp.index[sl])
        if self.weighting == "uniform" or grp.kind == "interface":
            return np.ones(n)
        return beta[grp.side_p[sl]] / beta.max()


@dataclass
class DGSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    space: GlobalSpace
    eta: float

    def export_triplets(self, path) -> None:
        """Write the matrix as ``row col value`` lines (1 entry per nonzero)."""
        coo = self.matrix.tocoo()
        np.savetxt(path, np.column_stack([coo.row, coo.col, coo.data]), fmt=["%d", "%d", "%.17e"])


def default_order(m: int) -> int:
    return 2 * m + 2


# ----------------------------------------------------------------------
# traces


def eval_sided(funcs, pts: np.ndarray, side: np.ndarray, shape=()) -> np.ndarray:
    """Evaluate ``funcs[side]`` at item points ``pts`` (n, q, 2) item by item side."""
    n, q = pts.shape[:2]
    out = np.zeros((n, q) + shape)
    for s in (0, 1):
        sel = side == s
        if sel.any():
            vals = np.asarray(funcs[s](pts[sel].reshape(-1, 2)), dtype=float)
            out[sel] = vals.reshape((int(sel.sum()), q) + shape)
    return out


def _trace(space: GlobalSpace, cell, side, pts):
    bid = space.slot_basis[cell, side]
    if (bid < 0).any():
        bad = int(np.flatnonzero(bid < 0)[0])
        raise AssemblyError(f"no basis for cell {int(cell[bad])} side {int(side[bad])}")
    vals, grads = space.eval_batch(bid, pts)
    return vals, grads, space.pdofs[bid], space.pmask[bid]


@dataclass
class FaceTerms:
    """Test-function quantities on a slice of surface items (T = trace DOFs)."""

    dofs: np.ndarray  # (n, T)
    mask: np.ndarray  # (n, T)
    w: np.ndarray  # (n, q)
    jump: np.ndarray  # (n, q, T)  [v] . n
    flux: np.ndarray  # (n, q, T)  {beta grad v} . n
    avg: np.ndarray  # (n, q, T)  {v}
    pen: np.ndarray  # (n,)
    pts: np.ndarray
    normal: np.ndarray


def face_terms(space: GlobalSpace, grp: FaceGroup, sl: slice, beta, eta, weights=None) -> FaceTerms:
    beta = np.asarray(beta)
    pts, nrm = grp.pts[sl], grp.normal[sl]
    pen = eta / grp.hscale[sl] if weights is None else eta * weights / grp.hscale[sl]
    vp, gp, dp, mp = _trace(space, grp.cell_p[sl], grp.side_p[sl], pts)
    bp = beta[grp.side_p[sl]][:, None, None]
    dnp = np.einsum("nqjd,nqd->nqj", gp, nrm)
    if grp.kind == "boundary":
        return FaceTerms(dp, mp, grp.w[sl], vp, bp * dnp, vp, pen, pts, nrm)
    vm, gm, dm, mm = _trace(space, grp.cell_m[sl], grp.side_m[sl], pts)
    bm = beta[grp.side_m[sl]][:, None, None]
    dnm = np.einsum("nqjd,nqd->nqj", gm, nrm)
    return FaceTerms(
        dofs=np.concatenate([dp, dm], axis=1),
        mask=np.concatenate([mp, mm], axis=1),
        w=grp.w[sl],
        jump=np.concatenate([vp, -vm], axis=2),
        flux=np.concatenate([0.5 * bp * dnp, 0.5 * bm * dnm], axis=2),
        avg=np.concatenate([0.5 * vp, 0.5 * vm], axis=2),
        pen=pen,
        pts=pts,
        normal=nrm,
    )


def jump_average_terms(t: FaceTerms) -> np.ndarray:
    """Local matrices ``-[u]{b dv} - [v]{b du} + pen [u][v]`` for each item: (n, T, T)."""
    X = np.einsum("nq,nqa,nqb->nab", t.w, t.flux, t.jump)
    Y = np.einsum("nq,nqa,nqb->nab", t.w, t.jump, t.jump)
    M = -(X + X.transpose(0, 2, 1)) + t.pen[:, None, None] * Y
    return 0.5 * (M + M.transpose(0, 2, 1))


def _chunks(n: int):
    for s in range(0, n, CHUNK):
        yield slice(s, min(n, s + CHUNK))


class _Accumulator:
    def __init__(self, n: int):
        self.n = n
        self.mat = sp.csr_matrix((n, n))
        self.rows, self.cols, self.vals = [], [], []
        self.size = 0

    def add(self, dofs, mask, local):
        rr = np.broadcast_to(dofs[:, :, None], local.shape)
        cc = np.broadcast_to(dofs[:, None, :], local.shape)
        mm = mask[:, :, None] & mask[:, None, :]
        self.rows.append(rr[mm])
        self.cols.append(cc[mm])
        self.vals.append(local[mm])
        self.size += int(mm.sum())
        if self.size > 4_000_000:
            self.flush()

    def flush(self):
        if self.rows:
            r = np.concatenate(self.rows)
            c = np.concatenate(self.cols)
            v = np.concatenate(self.vals)
            self.mat = self.mat + sp.csr_matrix((v, (r, c)), shape=(self.n, self.n))
        self.rows, self.cols, self.vals = [], [], []
        self.size = 0

    def result(self) -> sp.csr_matrix:
        self.flush()
        M = self.mat.tocsr()
        M = (M + M.T) * 0.5
        M.sum_duplicates()
        return M.tocsr()


def assemble(
    space: GlobalSpace,
    topology: CutTopology,
    data: ProblemData,
    penalty: PenaltyConfig | None = None,
    order: int | None = None,
    items: IntegrationItems | None = None,
) -> DGSystem:
    """Assemble the stiffness matrix and right-hand side."""
    if space.topology is not topology:
        raise AssemblyError("space and topology were built from different classifications")
    m = space.m
    penalty = penalty or PenaltyConfig()
    eta = penalty.value(m, data.beta)
    if items is None:
        items = build_items(topology, order if order is not None else default_order(m), data.breaklines)
    beta = np.array(data.beta)
    acc = _Accumulator(space.n_dof)
    rhs = np.zeros(space.n_dof)

    for grp in items.volume:
        for sl in _chunks(len(grp)):
            vals, grads, dofs, mask = _trace(space, grp.cell[sl], grp.side[sl], grp.pts[sl])
            wb = grp.w[sl] * beta[grp.side[sl]][:, None]
            local = np.einsum("nq,nqad,nqbd->nab", wb, grads, grads)
            local = 0.5 * (local + local.transpose(0, 2, 1))
            acc.add(dofs, mask, local)
            fv = eval_sided(data.f, grp.pts[sl], grp.side[sl])
            np.add.at(rhs, dofs[mask], np.einsum("nq,nqa->na", grp.w[sl] * fv, vals)[mask])

    for grp in items.faces:
        for sl in _chunks(len(grp)):
            t = face_terms(space, grp, sl, beta, eta, penalty.face_weights(grp, sl, beta))
            acc.add(t.dofs, t.mask, jump_average_terms(t))
            contrib = _data_terms(grp, sl, t, data)
            if contrib is not None:
                np.add.at(rhs, t.dofs[t.mask], contrib[t.mask])

    return DGSystem(acc.result(), rhs, space, eta)


def _data_terms(grp: FaceGroup, sl: slice, t: FaceTerms, data: ProblemData) -> np.ndarray | None:
    """Right-hand side contributions of boundary and interface data."""
    if grp.kind == "boundary":
        g = eval_sided(data.g, t.pts, grp.side_p[sl])
        integrand = g[:, :, None] * (-t.flux + t.pen[:, None, None] * t.jump)
        return np.einsum("nq,nqa->na", t.w, integrand)
    if grp.kind == "interface":
        n, q = t.pts.shape[:2]
        flat_p = t.pts.reshape(-1, 2)
        a = np.asarray(data.a(flat_p), dtype=float).reshape(n, q)
        b = np.asarray(data.b(flat_p, t.normal.reshape(-1, 2)), dtype=float).reshape(n, q)
        integrand = b[:, :, None] * t.avg - a[:, :, None] * t.flux + t.pen[:, None, None] * a[:, :, None] * t.jump
        return np.einsum("nq,nqa->na", t.w, integrand)
    return None


def exact_face_traces(grp: FaceGroup, sl: slice, data: ProblemData, beta):
    """Jump ``[u].n`` and normal flux average ``{beta du/dn}`` of the exact solution."""
    if data.exact is None or data.exact_grad is None:
        raise AssemblyError("exact solution with gradients required")
    beta = np.asarray(beta)
    pts, nrm = grp.pts[sl], grp.normal[sl]
    up = eval_sided(data.exact, pts, grp.side_p[sl])
    gp = eval_sided(data.exact_grad, pts, grp.side_p[sl], (2,))
    fp = beta[grp.side_p[sl]][:, None] * np.einsum("nqd,nqd->nq", gp, nrm)
    if grp.kind == "boundary":
        return up, fp, gp, None
    um = eval_sided(data.exact, pts, grp.side_m[sl])
    gm = eval_sided(data.exact_grad, pts, grp.side_m[sl], (2,))
    fm = beta[grp.side_m[sl]][:, None] * np.einsum("nqd,nqd->nq", gm, nrm)
    return up - um, 0.5 * (fp + fm), gp, gm


def galerkin_orthogonality_check(
    space: GlobalSpace,
    topology: CutTopology,
    data: ProblemData,
    penalty: PenaltyConfig | None = None,
    order: int | None = None,
) -> float:
    """``max_j |b_h(u, lambda_j) - l_h(lambda_j)|`` for the exact solution ``u``.

    Zero up to quadrature and geometry error when the scheme is consistent.
    """
    m = space.m
    penalty = penalty or PenaltyConfig()
    eta = penalty.value(m, data.beta)
    items = build_items(topology, order if order is not None else 2 * m + 6, data.breaklines)
    beta = np.array(data.beta)
    res = np.zeros(space.n_dof)

    for grp in items.volume:
        for sl in _chunks(len(grp)):
            vals, grads, dofs, mask = _trace(space, grp.cell[sl], grp.side[sl], grp.pts[sl])
            gu = eval_sided(data.exact_grad, grp.pts[sl], grp.side[sl], (2,))
            fv = eval_sided(data.f, grp.pts[sl], grp.side[sl])
            wb = grp.w[sl] * beta[grp.side[sl]][:, None]
            r = np.einsum("nq,nqd,nqad->na", wb, gu, grads) - np.einsum("nq,nqa->na", grp.w[sl] * fv, vals)
            np.add.at(res, dofs[mask], r[mask])

    for grp in items.faces:
        for sl in _chunks(len(grp)):
            t = face_terms(space, grp, sl, beta, eta, penalty.face_weights(grp, sl, beta))
            ju, fu, _, _ = exact_face_traces(grp, sl, data, beta)
            integrand = -(ju[:, :, None] * t.flux + fu[:, :, None] * t.jump) + t.pen[:, None, None] * ju[:, :, None] * t.jump
            r = np.einsum("nq,nqa->na", t.w, integrand)
            contrib = _data_terms(grp, sl, t, data)
            if contrib is not None:
                r = r - contrib
            np.add.at(res, t.dofs[t.mask], r[t.mask])
    return float(np.abs(res).max())

