"""Element patches: recursive face-neighbour growth inside one subdomain side."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import PatchError, UnisolvenceError
from .interface import CUT, CutTopology
from .mesh import PolygonalMesh
from .polynomials import dim_poly, vandermonde

logger = logging.getLogger(__name__)

DEFAULT_TARGETS = {1: 5, 2: 9, 3: 15}


def default_target(m: int) -> int:
    if m in DEFAULT_TARGETS:
        return DEFAULT_TARGETS[m]
    # same spacing as the tabulated values: roughly 1.5 * dim P_m
    return int(math.ceil(1.5 * dim_poly(m))) + 1


@dataclass
class ElementPatch:
    anchor: tuple[int, int]
    members: np.ndarray
    nodes: np.ndarray
    rank: int = -1
    cond: float = math.nan
    lam: float = math.nan
    augmented: list[int] = field(default_factory=list)

    @property
    def cardinality(self) -> int:
        return len(self.members)

    @property
    def side(self) -> int:
        return self.anchor[1]

    @property
    def center(self) -> np.ndarray:
        # nodes[0] is the anchor's sampling node
        return self.nodes[0]

    @property
    def scale(self) -> float:
        r = float(np.linalg.norm(self.nodes - self.center, axis=1).max())
        return r if r > 0 else 1.0

    def local(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.center) / self.scale


@dataclass
class PatchTable:
    """Patch of every (cell, side) slot; cut cells share their anchor's patch object."""

    m: int
    target: int
    patches: dict[tuple[int, int], ElementPatch]
    augmented: list[tuple[int, int]]

    def __getitem__(self, key: tuple[int, int]) -> ElementPatch:
        return self.patches[key]

    def unique(self) -> list[ElementPatch]:
        seen = {}
        for p in self.patches.values():
            seen.setdefault(id(p), p)
        return list(seen.values())


def grow_patch(mesh: PolygonalMesh, k: int, allowed: np.ndarray, target: int) -> np.ndarray:
    """Add whole rings of face neighbours (restricted to ``allowed``) until ``target`` is reached."""
    members = [k]
    seen = {k}
    ring = [k]
    while len(members) < target:
        nxt = set()
        for c in ring:
            for nb in mesh.face_neighbors[c]:
                nb = int(nb)
                if allowed[nb] and nb not in seen:
                    nxt.add(nb)
        if not nxt:
            raise PatchError(
                f"patch of cell {k} stalls at {len(members)} < {target} cells (disconnected region)"
            )
        ring = sorted(nxt)
        seen.update(ring)
        members.extend(ring)
    return np.array(members, dtype=np.int64)


def build_patches(
    mesh: PolygonalMesh,
    topology: CutTopology,
    m: int,
    target: int | None = None,
    check: bool = True,
) -> PatchTable:
    """Build ``S^i(K)`` for every cell/side pair.

    Uncut cells grow their own patch inside ``T_h^i``. A cut cell reuses
    the patch of its side-``i`` anchor; if that patch does not contain the
    cut cell it is appended, and the augmentation is recorded.
    """
    if target is None:
        target = default_target(m)
    if target < 1:
        raise PatchError("patch target must be positive")
    if check and target < dim_poly(m):
        raise PatchError(f"target {target} is below dim P_{m} = {dim_poly(m)}")
    bary = mesh.barycenters
    patches: dict[tuple[int, int], ElementPatch] = {}
    for side in (0, 1):
        allowed = np.zeros(mesh.n_cells, dtype=bool)
        allowed[topology.side_cells(side)] = True
        for k in np.flatnonzero(topology.cell_class == side):
            k = int(k)
            members = grow_patch(mesh, k, allowed, target)
            patches[(k, side)] = ElementPatch((k, side), members, bary[members])

    augmented = []
    for k in topology.cut_indices:
        k = int(k)
        for side in (0, 1):
            a = topology.anchor(k, side)
            if a < 0:
                raise PatchError(f"cut cell {k} has no side-{side} anchor")
            p = patches[(a, side)]
            if k not in p.members:
                p.members = np.append(p.members, k)
                p.nodes = bary[p.members]
                p.augmented.append(k)
                augmented.append((k, side))
            patches[(k, side)] = p
    if augmented:
        logger.info("patch augmentation fired for %d cut-cell sides", len(augmented))
    table = PatchTable(m, target, patches, augmented)
    if check:
        for p in table.unique():
            check_unisolvence(p, m)
    return table


def scaled_vandermonde(patch: ElementPatch, m: int) -> np.ndarray:
    return vandermonde(patch.local(patch.nodes), m)


def check_unisolvence(patch: ElementPatch, m: int, raise_error: bool = True) -> tuple[int, float]:
    """Rank and 2-norm condition number of the scaled Vandermonde matrix."""
    A = scaled_vandermonde(patch, m)
    s = np.linalg.svd(A, compute_uv=False)
    tol = max(A.shape) * np.finfo(float).eps * s[0] * 1e3
    rank = int((s > tol).sum())
    cond = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    patch.rank, patch.cond = rank, cond
    if rank < A.shape[1] and raise_error:
        raise UnisolvenceError(
            f"patch of {patch.anchor} has rank {rank} < {A.shape[1]}: sampling nodes lie on a degree-{m} curve"
        )
    return rank, cond


def probe_points(poly: np.ndarray, density: int) -> np.ndarray:
    """Vertices plus a barycentric lattice over the fan triangles of ``poly``."""
    c = poly.mean(axis=0)
    pts = [poly]
    n = max(density, 1)
    ij = [(i, j) for i in range(n + 1) for j in range(n + 1 - i)]
    lat = np.array(ij, dtype=float) / n
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        pts.append(c + lat[:, :1] * (a - c) + lat[:, 1:] * (b - c))
    return np.vstack(pts)


def estimate_lambda(patch: ElementPatch, m: int, density: int = 4, mesh: PolygonalMesh | None = None, probes: np.ndarray | None = None) -> float:
    """Upper-bound surrogate of the patch stability constant.

    ``sqrt(N) * max_x sqrt(v(x)^T (A^T A)^{-1} v(x))`` over probe points in
    the member cells, where ``v`` is the monomial row and ``N`` the number
    of sampling nodes.
    """
    if probes is None:
        if mesh is None:
            raise ValueError("either mesh or probes is required")
        probes = np.vstack([probe_points(mesh.cell_points(int(c)), density) for c in patch.members])
    A = scaled_vandermonde(patch, m)
    q, r = np.linalg.qr(A)
    V = vandermonde(patch.local(probes), m)
    # v^T (A^T A)^{-1} v = |R^{-T} v|^2
    w = np.linalg.solve(r.T, V.T)
    val = math.sqrt(len(patch.nodes)) * float(np.sqrt((w**2).sum(axis=0)).max())
    patch.lam = val
    return val
