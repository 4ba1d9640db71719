"""Level-set interfaces on polygonal meshes.

Sign convention: ``phi > 0`` is subdomain 0, ``phi < 0`` is subdomain 1.
Cells are classified from the signs of ``phi`` at their nodes; nodes with
``|phi|`` below a tolerance count as lying on the interface.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .exceptions import GeometryError
from .mesh import BOUNDARY, PolygonalMesh, polygon_centroid, polygon_signed_area

logger = logging.getLogger(__name__)

PURE0, PURE1, CUT = 0, 1, 2
CLASS_NAMES = {PURE0: "Pure0", PURE1: "Pure1", CUT: "Cut"}

_EDGE_SAMPLES = 7


@dataclass(frozen=True)
class LevelSet:
    phi: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, pts) -> np.ndarray:
        return np.asarray(self.phi(np.atleast_2d(np.asarray(pts, dtype=float))), dtype=float)

    def value(self, p) -> float:
        return float(self(np.asarray(p, dtype=float)[None, :])[0])

    def grad(self, pts) -> np.ndarray | None:
        if self.gradient is None:
            return None
        return np.asarray(self.gradient(np.atleast_2d(np.asarray(pts, dtype=float))), dtype=float)


@dataclass
class CutCell:
    """Geometry of one cut cell: the interface polyline and both sub-polygons.

    ``gamma`` runs from the crossing point bounding the side-0 part of the
    cell boundary (counter-clockwise) to the other one, so the right-hand
    normal of each polyline segment points into subdomain 0.
    """

    gamma: np.ndarray
    parts: tuple[np.ndarray, np.ndarray]
    areas: tuple[float, float]
    anchors: tuple[int, int] = (-1, -1)

    @property
    def gamma_normals(self) -> np.ndarray:
        d = np.diff(self.gamma, axis=0)
        n = np.column_stack([d[:, 1], -d[:, 0]])
        ln = np.linalg.norm(n, axis=1)
        ln[ln == 0] = 1.0
        return n / ln[:, None]

    @property
    def gamma_length(self) -> float:
        return float(np.linalg.norm(np.diff(self.gamma, axis=0), axis=1).sum())


@dataclass
class Violation:
    assumption: int
    cell: int
    message: str


@dataclass
class AssumptionReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_assumption(self, which: int) -> list[Violation]:
        return [v for v in self.violations if v.assumption == which]


@dataclass(frozen=True, eq=False)
class CutTopology:
    mesh: PolygonalMesh
    level_set: LevelSet
    node_sign: np.ndarray
    cell_class: np.ndarray
    face_class: np.ndarray
    face_roots: np.ndarray
    cut_cells: dict[int, CutCell]
    n_sub: int

    def in_side(self, k: int, side: int) -> bool:
        c = self.cell_class[k]
        return c == CUT or c == side

    def side_cells(self, side: int) -> np.ndarray:
        """Cells of T_h^side (pure side cells plus all cut cells)."""
        return np.flatnonzero((self.cell_class == side) | (self.cell_class == CUT))

    @property
    def cut_indices(self) -> np.ndarray:
        return np.flatnonzero(self.cell_class == CUT)

    def region(self, k: int, side: int) -> np.ndarray | None:
        """Polygon ``K^side`` or ``None`` when it is empty."""
        c = self.cell_class[k]
        if c == CUT:
            return self.cut_cells[k].parts[side]
        if c == side:
            return self.mesh.cell_points(k)
        return None

    def region_area(self, k: int, side: int) -> float:
        c = self.cell_class[k]
        if c == CUT:
            return self.cut_cells[k].areas[side]
        return float(self.mesh.areas[k]) if c == side else 0.0

    def face_segment(self, f: int, side: int) -> np.ndarray | None:
        """Endpoints of ``e^side`` as a (2, 2) array, or ``None``."""
        c = self.face_class[f]
        a, b = self.mesh.nodes[self.mesh.faces[f]]
        if c == side:
            return np.array([a, b])
        if c != CUT:
            return None
        r = self.face_roots[f]
        sa = self.node_sign[self.mesh.faces[f][0]]
        want = 1 if side == 0 else -1
        return np.array([a, r]) if sa == want else np.array([r, b])

    def anchor(self, k: int, side: int) -> int:
        return self.cut_cells[k].anchors[side]


def node_signs(mesh: PolygonalMesh, level_set: LevelSet, rel_tol: float = 1e-12) -> np.ndarray:
    vals = level_set(mesh.nodes)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise GeometryError(f"level set is not finite at node {int(bad[0])} {mesh.nodes[bad[0]].tolist()}")
    tol = rel_tol * mesh.h
    s = np.sign(vals).astype(np.int8)
    s[np.abs(vals) <= tol] = 0
    return s


def _edge_root(level_set: LevelSet, a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    d = b - a
    length = float(np.hypot(*d))

    def g(t):
        return level_set.value(a + t * d)

    try:
        t = brentq(g, 0.0, 1.0, xtol=max(tol / length, 1e-15), rtol=4 * np.finfo(float).eps)
    except (ValueError, RuntimeError) as exc:
        raise GeometryError(f"edge root finding failed: {exc}") from exc
    t = _newton_polish(level_set, a, d, t, 0.0, 1.0)
    return a + t * d


def _newton_polish(level_set: LevelSet, base, direction, t, lo, hi) -> float:
    if level_set.gradient is None:
        return t
    p = base + t * direction
    val = level_set.value(p)
    slope = float(level_set.grad(p)[0] @ direction)
    if slope == 0.0:
        return t
    t_new = t - val / slope
    if lo <= t_new <= hi and abs(level_set.value(base + t_new * direction)) <= abs(val):
        return t_new
    return t


def _project_to_interface(level_set: LevelSet, q: np.ndarray, direction: np.ndarray, reach: float) -> np.ndarray:
    """Root of phi on the line ``q + s * direction`` nearest to ``s = 0``."""
    g0 = level_set.value(q)
    if g0 == 0.0:
        return q
    steps = np.linspace(0.0, reach, 33)[1:]
    for s in steps:
        for sgn in (1.0, -1.0):
            gs = level_set.value(q + sgn * s * direction)
            if gs == 0.0:
                return q + sgn * s * direction
            if np.sign(gs) != np.sign(g0):
                lo, hi = sorted((0.0, sgn * s))
                t = brentq(lambda u: level_set.value(q + u * direction), lo, hi, xtol=1e-14 * reach, rtol=4 * np.finfo(float).eps)
                t = _newton_polish(level_set, q, direction, t, lo, hi)
                return q + t * direction
    raise GeometryError("could not project polyline point onto the interface; refine mesh")


def cut_cell_geometry(
    cell: np.ndarray,
    level_set: LevelSet,
    n_sub: int = 4,
    signs: np.ndarray | None = None,
    edge_roots: list | None = None,
    edge_mid_signs: list | None = None,
) -> CutCell:
    """Interface polyline and the two sub-polygons of a cut cell.

    ``cell`` is a counter-clockwise vertex array. ``signs`` and
    ``edge_roots`` (one entry per edge, ``None`` for edges without a strict
    sign change) may be supplied so that neighbouring cells share roots.
    ``edge_mid_signs`` gives, for edges whose two endpoints lie on the
    interface, the side of the edge interior (0 entries are ignored).
    """
    cell = np.asarray(cell, dtype=float)
    nv = len(cell)
    hk = float(np.max(np.linalg.norm(cell[:, None] - cell[None], axis=-1)))
    if signs is None:
        vals = level_set(cell)
        signs = np.sign(vals).astype(int)
        signs[np.abs(vals) <= 1e-12 * hk] = 0
    if edge_mid_signs is None:
        edge_mid_signs = [
            _midpoint_sign(level_set, cell[j], cell[(j + 1) % nv], 1e-12 * hk)
            if signs[j] == 0 and signs[(j + 1) % nv] == 0
            else 0
            for j in range(nv)
        ]
    mids = edge_mid_signs
    present = set(int(v) for v in signs) | set(int(v) for v in mids)
    if not (1 in present and -1 in present):
        raise GeometryError("cell is not cut by the interface")

    # boundary walk with crossing points inserted; tag 0 marks a crossing
    walk: list[tuple[np.ndarray, int]] = []
    for j in range(nv):
        a, b = cell[j], cell[(j + 1) % nv]
        sa, sb = int(signs[j]), int(signs[(j + 1) % nv])
        walk.append((a, sa))
        if sa == 0 and sb == 0 and mids[j] != 0:
            walk.append((0.5 * (a + b), int(mids[j])))
        if sa * sb < 0:
            r = edge_roots[j] if edge_roots is not None and edge_roots[j] is not None else _edge_root(level_set, a, b, 1e-12 * hk)
            walk.append((np.asarray(r, dtype=float), 0))
    crossings = [i for i, (_, s) in enumerate(walk) if s == 0]
    if len(crossings) != 2:
        raise GeometryError(
            f"interface crosses the cell boundary {len(crossings)} times (expected 2); refine mesh"
        )
    i0, i1 = crossings
    chain_a = [walk[i] for i in range(i0, i1 + 1)]
    chain_b = [walk[i % len(walk)] for i in range(i1, i0 + len(walk) + 1)]
    if any(s > 0 for _, s in chain_a):
        pos_chain, neg_chain = chain_a, chain_b
    else:
        pos_chain, neg_chain = chain_b, chain_a
    if not any(s > 0 for _, s in pos_chain) or not any(s < 0 for _, s in neg_chain):
        raise GeometryError("interface does not separate the cell into two parts; refine mesh")
    A, B = pos_chain[0][0], pos_chain[-1][0]

    chord = B - A
    clen = float(np.hypot(*chord))
    pts = [A]
    if clen > 0 and n_sub > 1:
        nrm = np.array([chord[1], -chord[0]]) / clen
        for j in range(1, n_sub):
            q = A + (j / n_sub) * chord
            pts.append(_project_to_interface(level_set, q, nrm, hk))
    pts.append(B)
    gamma = np.array(pts)

    interior = gamma[1:-1]
    k0 = np.vstack([[p for p, _ in pos_chain], interior[::-1]]) if len(interior) else np.array([p for p, _ in pos_chain])
    k1 = np.vstack([[p for p, _ in neg_chain], interior]) if len(interior) else np.array([p for p, _ in neg_chain])
    a0, a1 = polygon_signed_area(k0), polygon_signed_area(k1)
    return CutCell(gamma=gamma, parts=(k0, k1), areas=(a0, a1))


def _face_violation(level_set: LevelSet, a, b, sa, sb) -> str | None:
    """Detect faces crossed more than once from samples along the face."""
    t = np.linspace(0.0, 1.0, _EDGE_SAMPLES + 2)
    vals = level_set(a[None, :] + t[:, None] * (b - a)[None, :])
    sg = np.sign(vals)
    sg[0], sg[-1] = sa, sb
    nz = sg[sg != 0]
    changes = int(np.count_nonzero(np.diff(nz)))
    if changes > 1 or (changes == 1 and (sa == 0 or sb == 0)):
        return "face crossed more than once"
    return None


def _midpoint_sign(level_set: LevelSet, a, b, tol) -> int:
    v = level_set.value(0.5 * (a + b))
    return 0 if abs(v) <= tol else int(np.sign(v))


def _classify(mesh: PolygonalMesh, level_set: LevelSet, n_sub: int, strict: bool, anchor_rings: int = 0):
    violations: list[Violation] = []

    def fail(assumption, cell, message):
        if strict:
            raise GeometryError(f"cell {cell}: {message} (assumption {assumption}); refine mesh", cell)
        violations.append(Violation(assumption, cell, message))

    signs = node_signs(mesh, level_set)
    nf = mesh.n_faces
    face_class = np.empty(nf, dtype=np.int8)
    face_roots = np.full((nf, 2), np.nan)
    face_mid = np.zeros(nf, dtype=np.int8)
    tol = 1e-12 * mesh.h
    for f in range(nf):
        ia, ib = mesh.faces[f]
        sa, sb = int(signs[ia]), int(signs[ib])
        a, b = mesh.nodes[ia], mesh.nodes[ib]
        if sa == 0 and sb == 0:
            # chord between two interface points: its interior decides the side
            face_mid[f] = _midpoint_sign(level_set, a, b, tol)
            if face_mid[f] == 0:
                face_class[f] = CUT
                fail(1, int(mesh.face_cells[f, 0]), f"face {f} lies on the interface (tangency)")
                continue
            sa = sb = int(face_mid[f])
        if sa * sb < 0:
            face_class[f] = CUT
            face_roots[f] = _edge_root(level_set, a, b, tol)
        else:
            face_class[f] = PURE0 if (sa > 0 or sb > 0) else PURE1
        msg = _face_violation(level_set, a, b, sa, sb)
        if msg:
            fail(1, int(mesh.face_cells[f, 0]), f"face {f} {msg}")

    cell_class = np.empty(mesh.n_cells, dtype=np.int8)
    for k, cell in enumerate(mesh.cells):
        s = np.concatenate([signs[cell], face_mid[mesh.cell_faces[k]]])
        if (s > 0).any() and (s < 0).any():
            cell_class[k] = CUT
        elif (s > 0).any():
            cell_class[k] = PURE0
        elif (s < 0).any():
            cell_class[k] = PURE1
        else:
            cell_class[k] = CUT
            fail(1, k, "all nodes lie on the interface")

    cut_cells: dict[int, CutCell] = {}
    bary = mesh.barycenters
    for k in np.flatnonzero(cell_class == CUT):
        k = int(k)
        cell = mesh.cells[k]
        s = signs[cell]
        mids = face_mid[mesh.cell_faces[k]]
        if not (((s > 0).any() or (mids > 0).any()) and ((s < 0).any() or (mids < 0).any())):
            continue
        roots = []
        for f in mesh.cell_faces[k]:
            roots.append(face_roots[f] if face_class[f] == CUT and not np.isnan(face_roots[f, 0]) else None)
        try:
            cc = cut_cell_geometry(mesh.cell_points(k), level_set, n_sub, signs=s, edge_roots=roots, edge_mid_signs=list(mids))
        except GeometryError as exc:
            fail(1, k, str(exc))
            continue
        anchors = []
        for side in (0, 1):
            cand = [int(c) for c in mesh.touching(k) if cell_class[c] == side]
            if not cand and anchor_rings > 0:
                cand = _anchor_fallback(mesh, cell_class, k, side, anchor_rings)
                if cand:
                    logger.info("cell %d: side-%d anchor taken beyond the touching cells", k, side)
            if not cand:
                fail(2, k, f"no uncut side-{side} cell touches it")
                anchors.append(-1)
                continue
            d = np.linalg.norm(bary[cand] - bary[k], axis=1)
            anchors.append(cand[int(np.argmin(d))])
        cc.anchors = (anchors[0], anchors[1])
        cut_cells[k] = cc

    topo = CutTopology(
        mesh=mesh,
        level_set=level_set,
        node_sign=signs,
        cell_class=cell_class,
        face_class=face_class,
        face_roots=face_roots,
        cut_cells=cut_cells,
        n_sub=n_sub,
    )
    return topo, AssumptionReport(violations)


def _anchor_fallback(mesh: PolygonalMesh, cell_class, k: int, side: int, rings: int) -> list[int]:
    """Pure side-``side`` cells in the first ring beyond the touching cells that has any."""
    seen = {k}
    front = {k}
    for _ in range(rings + 1):
        nxt = set()
        for c in front:
            nxt.update(int(t) for t in mesh.touching(c))
        nxt -= seen
        seen |= nxt
        front = nxt
        cand = sorted(c for c in front if cell_class[c] == side)
        if cand:
            return cand
    return []


def default_n_sub(m: int) -> int:
    return max(4, m + 1)


def classify(mesh: PolygonalMesh, level_set: LevelSet, n_sub: int = 4, anchor_rings: int = 0) -> CutTopology:
    """Classify cells and faces against the interface and build cut geometry.

    Raises :class:`GeometryError` on the first violated geometric assumption.
    With ``anchor_rings > 0`` a cut cell without an uncut touching cell on
    some side takes its anchor from up to that many further rings of
    touching cells instead of failing.
    """
    topo, _ = _classify(mesh, level_set, n_sub, strict=True, anchor_rings=anchor_rings)
    return topo


def verify_assumptions(mesh: PolygonalMesh, level_set: LevelSet, n_sub: int = 4) -> AssumptionReport:
    """List every violation of the one-crossing and uncut-neighbour assumptions."""
    _, report = _classify(mesh, level_set, n_sub, strict=False)
    return report


def interface_measure_check(topo: CutTopology) -> float:
    """Largest relative area defect ``| |K0| + |K1| - |K| | / |K|`` over cut cells."""
    worst = 0.0
    for k, cc in topo.cut_cells.items():
        ak = topo.mesh.areas[k]
        worst = max(worst, abs(cc.areas[0] + cc.areas[1] - ak) / ak)
    return worst


def cell_subregion_centroid(topo: CutTopology, k: int, side: int) -> np.ndarray | None:
    reg = topo.region(k, side)
    return None if reg is None else polygon_centroid(reg)
