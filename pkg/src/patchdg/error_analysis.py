"""Error norms of discrete solutions and observed convergence orders."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import ProblemData, _chunks, eval_sided
from .exceptions import InvalidParameterError
from .integration import IntegrationItems, build_items
from .interface import CutTopology
from .reconstruction import GlobalSpace

DG_TERMS = ("grad", "face_jump", "face_avg_grad", "gamma_jump", "gamma_avg_grad")


@dataclass
class ErrorReport:
    h: float
    n_dof: int
    l2_error: float
    dg_error: float
    breakdown: dict = field(default_factory=dict)
    l2_order: float = math.nan
    dg_order: float = math.nan

    def row(self) -> dict:
        out = {
            "h": self.h,
            "n_dof": self.n_dof,
            "l2_error": self.l2_error,
            "l2_order": self.l2_order,
            "dg_error": self.dg_error,
            "dg_order": self.dg_order,
        }
        out.update({k: self.breakdown.get(k, math.nan) for k in DG_TERMS})
        return out


def error_order(m: int) -> int:
    return 2 * m + 4


def _uh(space: GlobalSpace, dofs: np.ndarray, cell, side, pts, grad=True):
    bid = space.slot_basis[cell, side]
    vals, grads = space.eval_batch(bid, pts, grad=grad)
    coef = dofs[space.pdofs[bid]] * space.pmask[bid]
    v = np.einsum("nqj,nj->nq", vals, coef)
    g = np.einsum("nqjd,nj->nqd", grads, coef) if grad else None
    return v, g


def _items(topology, space, order, items):
    if items is not None:
        return items
    return build_items(topology, order if order is not None else error_order(space.m))


def l2_error(
    dofs: np.ndarray,
    space: GlobalSpace,
    topology: CutTopology,
    exact,
    order: int | None = None,
    items: IntegrationItems | None = None,
) -> float:
    """``||u - u_h||`` over both subdomains, using each side's exact expression."""
    items = _items(topology, space, order, items)
    exact = exact if isinstance(exact, (tuple, list)) else (exact, exact)
    total = 0.0
    for grp in items.volume:
        for sl in _chunks(len(grp)):
            uh, _ = _uh(space, dofs, grp.cell[sl], grp.side[sl], grp.pts[sl], grad=False)
            u = eval_sided(exact, grp.pts[sl], grp.side[sl])
            total += float((grp.w[sl] * (u - uh) ** 2).sum())
    return math.sqrt(total)


def dg_energy_error(
    dofs: np.ndarray,
    space: GlobalSpace,
    topology: CutTopology,
    exact,
    exact_grad,
    order: int | None = None,
    items: IntegrationItems | None = None,
) -> tuple[float, dict]:
    """DG energy norm of ``u - u_h`` and its five squared contributions."""
    items = _items(topology, space, order, items)
    exact = exact if isinstance(exact, (tuple, list)) else (exact, exact)
    exact_grad = exact_grad if isinstance(exact_grad, (tuple, list)) else (exact_grad, exact_grad)
    parts = dict.fromkeys(DG_TERMS, 0.0)
    for grp in items.volume:
        for sl in _chunks(len(grp)):
            _, guh = _uh(space, dofs, grp.cell[sl], grp.side[sl], grp.pts[sl])
            gu = eval_sided(exact_grad, grp.pts[sl], grp.side[sl], (2,))
            parts["grad"] += float((grp.w[sl][..., None] * (gu - guh) ** 2).sum())
    for grp in items.faces:
        jump_key, avg_key = ("gamma_jump", "gamma_avg_grad") if grp.kind == "interface" else ("face_jump", "face_avg_grad")
        for sl in _chunks(len(grp)):
            pts = grp.pts[sl]
            up, gup = _uh(space, dofs, grp.cell_p[sl], grp.side_p[sl], pts)
            ep = eval_sided(exact, pts, grp.side_p[sl]) - up
            gep = eval_sided(exact_grad, pts, grp.side_p[sl], (2,)) - gup
            if grp.kind == "boundary":
                jump, avg = ep, gep
            else:
                um, gum = _uh(space, dofs, grp.cell_m[sl], grp.side_m[sl], pts)
                em = eval_sided(exact, pts, grp.side_m[sl]) - um
                gem = eval_sided(exact_grad, pts, grp.side_m[sl], (2,)) - gum
                jump, avg = ep - em, 0.5 * (gep + gem)
            hs = grp.hscale[sl][:, None]
            w = grp.w[sl]
            parts[jump_key] += float((w / hs * jump**2).sum())
            parts[avg_key] += float((w * hs * (avg**2).sum(axis=-1)).sum())
    return math.sqrt(sum(parts.values())), parts


def dof_count(space: GlobalSpace) -> int:
    """``|T_h| + |T_h^Gamma|``: one unknown per cell and occupied side."""
    return int(space.n_dof)


def convergence_orders(reports: list[ErrorReport]) -> list[ErrorReport]:
    """Fill observed orders ``log(e1/e2) / log(h1/h2)`` between consecutive rows."""
    hs = [r.h for r in reports]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise InvalidParameterError(f"mesh sizes must be strictly decreasing, got {hs}")
    for prev, cur in zip(reports, reports[1:]):
        lr = math.log(prev.h / cur.h)
        cur.l2_order = _order(prev.l2_error, cur.l2_error, lr)
        cur.dg_order = _order(prev.dg_error, cur.dg_error, lr)
    return reports


def _order(e1: float, e2: float, log_ratio: float) -> float:
    if e1 <= 0 or e2 <= 0:
        return math.nan
    return math.log(e1 / e2) / log_ratio


def error_report(
    dofs: np.ndarray, space: GlobalSpace, topology: CutTopology, data: ProblemData, h: float | None = None, order: int | None = None
) -> ErrorReport:
    items = build_items(topology, order if order is not None else error_order(space.m), data.breaklines)
    l2 = l2_error(dofs, space, topology, data.exact, items=items)
    dg, parts = dg_energy_error(dofs, space, topology, data.exact, data.exact_grad, items=items)
    return ErrorReport(h if h is not None else topology.mesh.h, dof_count(space), l2, dg, parts)
