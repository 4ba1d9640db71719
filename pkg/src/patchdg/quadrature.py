"""Quadrature on triangles, simple polygons, segments and polylines."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .mesh import polygon_signed_area

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    target: str = "region"

    def integrate(self, f) -> float:
        if len(self.weights) == 0:
            return 0.0
        return float(np.dot(self.weights, f(self.points)))

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def reference_triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed-coordinate rule on the triangle (0,0), (1,0), (0,1).

    Gauss-Legendre in the collapsed direction and Gauss-Jacobi(1, 0) in the
    other, so all weights are positive and the rule is exact to ``order``.
    """
    n = max(1, math.ceil((order + 1) / 2))
    xi, wx = gauss_legendre_01(n)
    t, wt = roots_jacobi(n, 1.0, 0.0)
    eta = 0.5 * (t + 1.0)
    weta = 0.25 * wt
    XI, ETA = np.meshgrid(xi, eta, indexing="ij")
    W = np.outer(wx, weta)
    pts = np.column_stack([(XI * (1.0 - ETA)).ravel(), ETA.ravel()])
    return pts, W.ravel()


def triangle_rule(tri: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    ref, w = reference_triangle_rule(order)
    a, b, c = tri
    jac = np.column_stack([b - a, c - a])
    det = abs(float(np.linalg.det(jac)))
    return a + ref @ jac.T, w * det


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _in_closed_triangle(p, a, b, c, eps, dist) -> bool:
    """``p`` inside or on the boundary of ``abc`` but not at a corner."""
    if any(abs(p[0] - q[0]) + abs(p[1] - q[1]) <= dist for q in (a, b, c)):
        return False
    return _cross(a, b, p) >= -eps and _cross(b, c, p) >= -eps and _cross(c, a, p) >= -eps


def triangulate_polygon(poly: np.ndarray) -> list[np.ndarray]:
    """Ear-clipping triangulation of a simple counter-clockwise polygon.

    Degenerate (collinear) ears are dropped, so the output triangles all
    have positive area and tile the polygon.
    """
    pts = np.asarray(poly, dtype=float)
    if polygon_signed_area(pts) < 0:
        pts = pts[::-1]
    idx = list(range(len(pts)))
    scale = float(np.ptp(pts, axis=0).max()) if len(pts) else 0.0
    eps = 1e-14 * scale * scale
    tris = []
    guard = 0
    while len(idx) > 3 and guard < 10 * len(pts) ** 2:
        guard += 1
        clipped = False
        n = len(idx)
        for j in range(n):
            i0, i1, i2 = idx[j - 1], idx[j], idx[(j + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            cr = _cross(a, b, c)
            if abs(cr) <= eps:
                # collinear middle vertex: remove without emitting a triangle
                del idx[j]
                clipped = True
                break
            if cr < 0:
                continue
            # a vertex on the diagonal a-c would leave a degenerate remainder
            if any(_in_closed_triangle(pts[q], a, b, c, eps, 1e-12 * scale) for q in idx if q not in (i0, i1, i2)):
                continue
            tris.append(np.array([a, b, c]))
            del idx[j]
            clipped = True
            break
        if not clipped:
            logger.warning("ear clipping stalled; falling back to a fan")
            p0 = pts[idx[0]]
            for j in range(1, len(idx) - 1):
                tris.append(np.array([p0, pts[idx[j]], pts[idx[j + 1]]]))
            return [t for t in tris if _cross(*t) > eps]
    if len(idx) == 3:
        t = pts[idx]
        if _cross(*t) > eps:
            tris.append(t)
    return tris


def cell_quadrature(region: np.ndarray, order: int) -> QuadratureRule:
    """Rule on a simple polygon exact for polynomials of degree ``order``."""
    tris = triangulate_polygon(region)
    if not tris:
        logger.warning("zero-area polygon; returning an empty rule")
        return QuadratureRule(np.zeros((0, 2)), np.zeros(0), "region")
    pts, wts = zip(*(triangle_rule(t, order) for t in tris))
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), "region")


def clip_half_plane(poly: np.ndarray, normal, offset: float) -> np.ndarray:
    """Part of a convex polygon where ``normal . x >= offset`` (Sutherland-Hodgman)."""
    poly = np.asarray(poly, dtype=float)
    d = poly @ np.asarray(normal, dtype=float) - offset
    out = []
    for i in range(len(poly)):
        j = (i + 1) % len(poly)
        if d[i] >= 0:
            out.append(poly[i])
        if (d[i] < 0 < d[j]) or (d[j] < 0 < d[i]):
            t = d[i] / (d[i] - d[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.array(out).reshape(-1, 2)


def crosses_line(poly: np.ndarray, normal, offset: float, tol: float = 1e-12) -> bool:
    d = np.asarray(poly, dtype=float) @ np.asarray(normal, dtype=float) - offset
    scale = tol * max(1.0, float(np.abs(poly).max()))
    return bool(d.min() < -scale and d.max() > scale)


def split_cell_quadrature(region: np.ndarray, order: int, lines) -> QuadratureRule:
    """Cell rule that does not straddle any of the lines ``(normal, offset)``.

    Integrands with a kink along a known line lose accuracy under a
    single Gauss rule; the region is triangulated and every triangle is
    clipped into convex pieces on either side of each line.
    """
    pieces = triangulate_polygon(region)
    for normal, offset in lines:
        nxt = []
        for piece in pieces:
            if not crosses_line(piece, normal, offset):
                nxt.append(piece)
                continue
            for sgn in (1.0, -1.0):
                part = clip_half_plane(piece, sgn * np.asarray(normal, dtype=float), sgn * offset)
                if len(part) >= 3 and abs(polygon_signed_area(part)) > 0:
                    nxt.append(part)
        pieces = nxt
    pts, wts = [], []
    for piece in pieces:
        for tri in triangulate_polygon(piece) if len(piece) > 3 else [piece]:
            p, w = triangle_rule(tri, order)
            pts.append(p)
            wts.append(w)
    if not pts:
        return QuadratureRule(np.zeros((0, 2)), np.zeros(0), "region")
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), "region")


def segment_quadrature(points: np.ndarray, order: int, target: str = "segment") -> QuadratureRule:
    """Gauss-Legendre rule on each piece of a polyline ``points[0] -> points[-1]``."""
    pts = np.asarray(points, dtype=float)
    n = max(1, math.ceil((order + 1) / 2))
    s, w = gauss_legendre_01(n)
    a, b = pts[:-1], pts[1:]
    lengths = np.linalg.norm(b - a, axis=1)
    keep = lengths > 0
    a, b, lengths = a[keep], b[keep], lengths[keep]
    qp = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    qw = lengths[:, None] * w[None, :]
    return QuadratureRule(qp.reshape(-1, 2), qw.ravel(), target)
