"""Polygonal meshes: construction, face topology, JSON I/O and regularity diagnostics."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import InvalidParameterError, MeshError

logger = logging.getLogger(__name__)

BOUNDARY = -1


def polygon_signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(pts: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon (vertex mean for degenerate input)."""
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    if abs(a) < 1e-300:
        return pts.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return False


def is_simple_polygon(pts: np.ndarray) -> bool:
    n = len(pts)
    if n < 3:
        return False
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                return False
    return True


def is_convex_polygon(pts: np.ndarray) -> bool:
    d = np.roll(pts, -1, axis=0) - pts
    cross = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
    return bool(np.all(cross >= -1e-14 * np.abs(cross).max()))


@dataclass(frozen=True, eq=False)
class PolygonalMesh:
    """Immutable polygonal mesh with counter-clockwise cells.

    Face topology and per-cell geometry are derived on construction.
    ``faces[f]`` holds the two node indices of face ``f`` and
    ``face_cells[f]`` the incident cells, with ``BOUNDARY`` (-1) in the
    second slot for boundary faces. ``cell_faces[k][j]`` is the face
    joining local vertices ``j`` and ``j + 1`` of cell ``k``.
    """

    nodes: np.ndarray
    cells: tuple[np.ndarray, ...]
    faces: np.ndarray = field(init=False, repr=False)
    face_cells: np.ndarray = field(init=False, repr=False)
    cell_faces: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise MeshError("nodes must be an array of shape (n, 2)")
        nodes.setflags(write=False)
        cells = []
        for k, c in enumerate(self.cells):
            c = np.array(c, dtype=np.int64)
            c.setflags(write=False)
            cells.append(c)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "cells", tuple(cells))
        self._build_face_topology()

    # ------------------------------------------------------------------
    # topology

    def _build_face_topology(self) -> None:
        lookup: dict[tuple[int, int], int] = {}
        faces: list[tuple[int, int]] = []
        incident: list[list[int]] = []
        cell_faces = []
        for k, cell in enumerate(self.cells):
            fk = np.empty(len(cell), dtype=np.int64)
            for j in range(len(cell)):
                a, b = int(cell[j]), int(cell[(j + 1) % len(cell)])
                key = (a, b) if a < b else (b, a)
                f = lookup.get(key)
                if f is None:
                    f = len(faces)
                    lookup[key] = f
                    faces.append(key)
                    incident.append([k])
                else:
                    if len(incident[f]) >= 2:
                        raise MeshError(
                            f"non-manifold face {key}: shared by cells "
                            f"{incident[f][0]}, {incident[f][1]} and {k}"
                        )
                    incident[f].append(k)
                fk[j] = f
            fk.setflags(write=False)
            cell_faces.append(fk)
        face_cells = np.full((len(faces), 2), BOUNDARY, dtype=np.int64)
        for f, inc in enumerate(incident):
            face_cells[f, : len(inc)] = inc
        faces_arr = np.array(faces, dtype=np.int64).reshape(-1, 2)
        faces_arr.setflags(write=False)
        face_cells.setflags(write=False)
        object.__setattr__(self, "faces", faces_arr)
        object.__setattr__(self, "face_cells", face_cells)
        object.__setattr__(self, "cell_faces", tuple(cell_faces))

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] != BOUNDARY)

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] == BOUNDARY)

    def cell_points(self, k: int) -> np.ndarray:
        return self.nodes[self.cells[k]]

    @cached_property
    def areas(self) -> np.ndarray:
        return np.array([polygon_signed_area(self.cell_points(k)) for k in range(self.n_cells)])

    @cached_property
    def barycenters(self) -> np.ndarray:
        """Sampling nodes: the area centroid of every cell."""
        return np.array([polygon_centroid(self.cell_points(k)) for k in range(self.n_cells)])

    @cached_property
    def diameters(self) -> np.ndarray:
        out = np.empty(self.n_cells)
        for k in range(self.n_cells):
            p = self.cell_points(k)
            d = p[:, None, :] - p[None, :, :]
            out[k] = math.sqrt(float((d**2).sum(axis=-1).max()))
        return out

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def face_lengths(self) -> np.ndarray:
        p = self.nodes[self.faces]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @cached_property
    def face_neighbors(self) -> tuple[np.ndarray, ...]:
        """Cells sharing a face with each cell, ordered by local face."""
        out = []
        for k in range(self.n_cells):
            fc = self.face_cells[self.cell_faces[k]]
            other = np.where(fc[:, 0] == k, fc[:, 1], fc[:, 0])
            out.append(other[other != BOUNDARY])
        return tuple(out)

    @cached_property
    def node_cells(self) -> tuple[np.ndarray, ...]:
        buckets: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for k, cell in enumerate(self.cells):
            for v in cell:
                buckets[int(v)].append(k)
        return tuple(np.array(sorted(b), dtype=np.int64) for b in buckets)

    def touching(self, k: int) -> np.ndarray:
        """Delta(K): cells sharing at least one node with ``k`` (``k`` excluded)."""
        s = np.unique(np.concatenate([self.node_cells[int(v)] for v in self.cells[k]]))
        return s[s != k]

    def outward_normal(self, k: int, j: int) -> np.ndarray:
        """Unit outward normal of local edge ``j`` of cell ``k``."""
        c = self.cells[k]
        a, b = self.nodes[c[j]], self.nodes[c[(j + 1) % len(c)]]
        t = b - a
        return np.array([t[1], -t[0]]) / np.hypot(t[0], t[1])

    def copy_with_nodes(self, nodes: np.ndarray) -> "PolygonalMesh":
        return PolygonalMesh(nodes, self.cells)


def build_face_topology(mesh: PolygonalMesh) -> PolygonalMesh:
    """Return ``mesh`` with faces populated.

    Topology is always derived on construction, so this is the identity;
    it exists so pipelines can name the stage explicitly.
    """
    return mesh


# ----------------------------------------------------------------------
# construction


def generate_triangular_mesh(domain: Sequence[float], h: float) -> PolygonalMesh:
    """Uniform right-triangle mesh of the rectangle ``(x0, x1, y0, y1)``.

    Each grid square of side about ``h`` is split along its positive-slope
    diagonal. When ``h`` does not divide a side, the spacing is shrunk so
    that it does.
    """
    x0, x1, y0, y1 = map(float, domain)
    if not h > 0 or not math.isfinite(h):
        raise InvalidParameterError(f"mesh size must be positive, got {h}")
    width, height = x1 - x0, y1 - y0
    if width <= 0 or height <= 0:
        raise InvalidParameterError(f"empty domain {domain}")
    if h > min(width, height) * (1 + 1e-12):
        raise InvalidParameterError(f"h = {h} exceeds the shortest domain side")
    nx = max(1, int(math.ceil(width / h - 1e-9)))
    ny = max(1, int(math.ceil(height / h - 1e-9)))
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    cells = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    return PolygonalMesh(nodes, cells)


def validate_cells(nodes: np.ndarray, cells: Sequence[Sequence[int]]) -> list[list[int]]:
    """Check cell loops and return them oriented counter-clockwise."""
    n = len(nodes)
    used = np.zeros(n, dtype=bool)
    out = []
    for k, cell in enumerate(cells):
        cell = [int(v) for v in cell]
        if len(cell) < 3:
            raise MeshError(f"cell {k} has fewer than 3 nodes")
        if len(set(cell)) != len(cell):
            raise MeshError(f"cell {k} repeats a node index: {cell}")
        if min(cell) < 0 or max(cell) >= n:
            raise MeshError(f"cell {k} references a node outside [0, {n})")
        pts = nodes[cell]
        if not is_simple_polygon(pts):
            raise MeshError(f"cell {k} is not a simple polygon")
        area = polygon_signed_area(pts)
        if area == 0:
            raise MeshError(f"cell {k} has zero area")
        if area < 0:
            cell = cell[::-1]
        if not is_convex_polygon(nodes[cell]):
            logger.warning("cell %d is not convex", k)
        used[cell] = True
        out.append(cell)
    dangling = np.flatnonzero(~used)
    if dangling.size:
        raise MeshError(f"dangling nodes not used by any cell: {dangling[:10].tolist()}")
    return out


def mesh_from_dict(data: dict) -> PolygonalMesh:
    try:
        nodes = np.asarray(data["nodes"], dtype=float)
        cells = data["cells"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MeshError(f"malformed mesh document: {exc}") from exc
    if nodes.ndim != 2 or nodes.shape[1] != 2:
        raise MeshError("'nodes' must be a list of [x, y] pairs")
    return PolygonalMesh(nodes, validate_cells(nodes, cells))


def load_polygonal_mesh(source) -> PolygonalMesh:
    """Read a mesh from a JSON file (``{"nodes": [[x, y], ...], "cells": [[i, j, ...], ...]}``)."""
    with open(source) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MeshError(f"{source}: invalid JSON: {exc}") from exc
    return mesh_from_dict(data)


def mesh_to_dict(mesh: PolygonalMesh) -> dict:
    return {
        "nodes": [[float(x), float(y)] for x, y in mesh.nodes],
        "cells": [[int(v) for v in c] for c in mesh.cells],
    }


def save_polygonal_mesh(mesh: PolygonalMesh, target) -> None:
    Path(target).write_text(json.dumps(mesh_to_dict(mesh)))


# ----------------------------------------------------------------------
# diagnostics


@dataclass
class RegularityReport:
    rho_v: float
    rho_s: float
    tau: float
    worst_rho_v: int
    worst_rho_s: int
    worst_tau: int


def _point_in_polygon(p: np.ndarray, poly: np.ndarray) -> bool:
    x, y = p
    inside = False
    n = len(poly)
    for i in range(n):
        (xa, ya), (xb, yb) = poly[i], poly[(i + 1) % n]
        if (ya > y) != (yb > y):
            xi = xa + (y - ya) * (xb - xa) / (yb - ya)
            if x < xi:
                inside = not inside
    return inside


def _distance_to_boundary(p: np.ndarray, poly: np.ndarray) -> float:
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    t = np.clip(((p - a) * ab).sum(axis=1) / (ab**2).sum(axis=1), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.linalg.norm(proj - p, axis=1).min())


def inradius_estimate(poly: np.ndarray, levels: int = 2) -> float:
    """Largest boundary distance over interior sample points.

    Samples are the centroid plus repeated midpoints towards vertices and
    edge midpoints, so the value is a lower bound of the true inradius.
    """
    c = polygon_centroid(poly)
    anchors = np.vstack([poly, 0.5 * (poly + np.roll(poly, -1, axis=0))])
    samples = [c]
    frontier = [c]
    for _ in range(levels):
        nxt = []
        for q in frontier:
            for a in anchors:
                nxt.append(0.5 * (q + a))
        samples.extend(nxt)
        frontier = nxt[: len(anchors)]
    best = 0.0
    for q in samples:
        if _point_in_polygon(q, poly):
            best = max(best, _distance_to_boundary(q, poly))
    return best


def regularity_report(mesh: PolygonalMesh) -> RegularityReport:
    hk = mesh.diameters
    min_edge = np.array([mesh.face_lengths[f].min() for f in mesh.cell_faces])
    rv = min_edge / hk
    rs = np.empty(mesh.n_cells)
    tau = np.empty(mesh.n_cells)
    for k in range(mesh.n_cells):
        nb = mesh.touching(k)
        hmax = max(hk[k], hk[nb].max()) if nb.size else hk[k]
        rs[k] = hk[k] / hmax
        tau[k] = inradius_estimate(mesh.cell_points(k)) / hk[k]
    return RegularityReport(
        rho_v=float(rv.min()),
        rho_s=float(rs.min()),
        tau=float(tau.min()),
        worst_rho_v=int(rv.argmin()),
        worst_rho_s=int(rs.argmin()),
        worst_tau=int(tau.argmin()),
    )
