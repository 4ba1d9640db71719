"""Batched quadrature items over cut sub-regions, face pieces and interface polylines.

Items of one kind are stored in groups with a common number of
quadrature points; shorter rules are padded with zero weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interface import CUT, CutTopology
from .mesh import BOUNDARY
from .quadrature import cell_quadrature, crosses_line, reference_triangle_rule, segment_quadrature, split_cell_quadrature


@dataclass
class VolumeGroup:
    cell: np.ndarray
    side: np.ndarray
    pts: np.ndarray
    w: np.ndarray

    def __len__(self):
        return len(self.cell)


@dataclass
class FaceGroup:
    """Two-sided (or one-sided) surface items.

    ``plus`` traces use ``(cell_p, side_p)``; ``minus`` traces use
    ``(cell_m, side_m)`` and are absent (-1) on the boundary. ``normal``
    points out of the plus trace. On the interface the plus trace is the
    side-1 part of the cut cell, so ``normal`` points into subdomain 0.
    """

    kind: str
    index: np.ndarray
    cell_p: np.ndarray
    side_p: np.ndarray
    cell_m: np.ndarray
    side_m: np.ndarray
    pts: np.ndarray
    w: np.ndarray
    normal: np.ndarray
    hscale: np.ndarray

    def __len__(self):
        return len(self.index)


@dataclass
class IntegrationItems:
    order: int
    volume: list[VolumeGroup]
    faces: list[FaceGroup]

    def groups(self, kind: str) -> list[FaceGroup]:
        return [g for g in self.faces if g.kind == kind]


def _pad(rules):
    q = max(len(w) for _, w in rules)
    n = len(rules)
    P = np.zeros((n, q, 2))
    W = np.zeros((n, q))
    for j, (p, w) in enumerate(rules):
        if len(w):
            P[j, : len(w)] = p
            P[j, len(w) :] = p[0]
            W[j, : len(w)] = w
    return P, W


def _by_size(entries):
    """Split (meta, pts, w) entries into lists keyed by rule length."""
    buckets: dict[int, list] = {}
    for e in entries:
        buckets.setdefault(len(e[-1]), []).append(e)
    return [buckets[k] for k in sorted(buckets)]


def face_normals(topology: CutTopology) -> np.ndarray:
    """Unit normal of every face, outward from ``face_cells[f, 0]``."""
    mesh = topology.mesh
    out = np.zeros((mesh.n_faces, 2))
    for k, fk in enumerate(mesh.cell_faces):
        for j, f in enumerate(fk):
            if mesh.face_cells[f, 0] == k:
                out[f] = mesh.outward_normal(k, j)
    return out


def build_items(topology: CutTopology, order: int, breaklines=()) -> IntegrationItems:
    """Quadrature items for every volume region, face piece and interface polyline.

    ``breaklines`` lists lines ``(normal, offset)`` across which the data
    are not smooth; volume regions crossing one are split along it.
    """
    mesh = topology.mesh
    cls = topology.cell_class
    breaklines = tuple(breaklines)

    def region_rule(poly):
        if any(crosses_line(poly, n, c) for n, c in breaklines):
            return split_cell_quadrature(poly, order, breaklines)
        return cell_quadrature(poly, order)

    volume: list[VolumeGroup] = []
    # uncut triangles: one affine map of the reference rule each
    tri = np.array([len(c) == 3 for c in mesh.cells]) & (cls != CUT)
    for n, c in breaklines:
        tri &= ~np.array([crosses_line(mesh.cell_points(k), n, c) for k in range(mesh.n_cells)])
    tri_cells = np.flatnonzero(tri)
    if tri_cells.size:
        ref, rw = reference_triangle_rule(order)
        v = mesh.nodes[np.array([mesh.cells[k] for k in tri_cells])]
        e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
        det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        pts = v[:, None, 0, :] + ref[None, :, 0, None] * e1[:, None, :] + ref[None, :, 1, None] * e2[:, None, :]
        volume.append(VolumeGroup(tri_cells, cls[tri_cells].astype(np.int64), pts, det[:, None] * rw[None, :]))
    entries = []
    for k in np.flatnonzero(~tri & (cls != CUT)):
        r = region_rule(mesh.cell_points(int(k)))
        entries.append(((int(k), int(cls[k])), r.points, r.weights))
    for k, cc in sorted(topology.cut_cells.items()):
        for side in (0, 1):
            r = region_rule(cc.parts[side])
            if len(r):
                entries.append(((k, side), r.points, r.weights))
    for bucket in _by_size(entries):
        P, W = _pad([(p, w) for _, p, w in bucket])
        meta = np.array([m for m, _, _ in bucket], dtype=np.int64)
        volume.append(VolumeGroup(meta[:, 0], meta[:, 1], P, W))

    normals = face_normals(topology)
    faces: list[FaceGroup] = []
    interior_entries, boundary_entries = [], []
    for f in range(mesh.n_faces):
        c0, c1 = mesh.face_cells[f]
        for side in (0, 1):
            seg = topology.face_segment(f, side)
            if seg is None or np.allclose(seg[0], seg[1], rtol=0, atol=1e-15):
                continue
            r = segment_quadrature(seg, order)
            if not len(r):
                continue
            meta = (f, c0, side, c1, side if c1 != BOUNDARY else -1)
            (interior_entries if c1 != BOUNDARY else boundary_entries).append((meta, r.points, r.weights))
    for kind, entries_k in (("interior", interior_entries), ("boundary", boundary_entries)):
        for bucket in _by_size(entries_k):
            P, W = _pad([(p, w) for _, p, w in bucket])
            meta = np.array([m for m, _, _ in bucket], dtype=np.int64)
            fidx = meta[:, 0]
            N = np.broadcast_to(normals[fidx][:, None, :], P.shape).copy()
            faces.append(
                FaceGroup(kind, fidx, meta[:, 1], meta[:, 2], meta[:, 3], meta[:, 4], P, W, N, mesh.face_lengths[fidx])
            )

    gamma_entries = []
    for k, cc in sorted(topology.cut_cells.items()):
        r = segment_quadrature(cc.gamma, order, target="interface")
        if not len(r):
            continue
        d = np.diff(cc.gamma, axis=0)
        keep = np.linalg.norm(d, axis=1) > 0
        nq = len(r) // int(keep.sum())
        nrm = np.repeat(cc.gamma_normals[keep], nq, axis=0)
        gamma_entries.append((k, r.points, np.column_stack([nrm, r.weights])))
    for bucket in _by_size(gamma_entries):
        q = max(len(e[-1]) for e in bucket)
        n = len(bucket)
        P = np.zeros((n, q, 2))
        W = np.zeros((n, q))
        N = np.zeros((n, q, 2))
        for j, (_, p, nw) in enumerate(bucket):
            P[j, : len(p)] = p
            P[j, len(p) :] = p[0]
            N[j, : len(p)] = nw[:, :2]
            N[j, len(p) :] = nw[0, :2]
            W[j, : len(p)] = nw[:, 2]
        cells = np.array([e[0] for e in bucket], dtype=np.int64)
        ones = np.ones(n, dtype=np.int64)
        faces.append(
            FaceGroup("interface", cells, cells, ones, cells, 0 * ones, P, W, N, mesh.diameters[cells])
        )
    return IntegrationItems(order, volume, faces)
