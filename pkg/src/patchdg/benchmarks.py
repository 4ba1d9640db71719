"""Registered interface benchmarks (Examples 1-6).

Exact solutions are written once as sympy expressions per side; source
terms, gradients, boundary and jump data are derived from them.
Side 0 is ``phi > 0``; for the closed interfaces side 1 is the inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .assembly import ProblemData
from .exceptions import BenchmarkError
from .interface import LevelSet, _project_to_interface

X, Y = sp.symbols("x y", real=True)


def _lambdify(expr) -> Callable[[np.ndarray], np.ndarray]:
    fn = sp.lambdify((X, Y), expr, modules="numpy")

    def f(p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.broadcast_to(np.asarray(fn(x, y), dtype=float), x.shape).copy()

    return f


def _lambdify_grad(expr) -> Callable[[np.ndarray], np.ndarray]:
    gx, gy = _lambdify(sp.diff(expr, X)), _lambdify(sp.diff(expr, Y))
    return lambda p: np.stack([gx(p), gy(p)], axis=-1)


@dataclass
class BenchmarkSpec:
    name: str
    phi: sp.Expr
    beta: tuple[float, float]
    u: tuple[sp.Expr, sp.Expr]
    domain: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)
    mesh_family: str = "triangular"
    h_list: tuple[float, ...] = (1 / 5, 1 / 10, 1 / 20, 1 / 40, 1 / 80)
    mesh_files: tuple[str, ...] = ()
    f_override: Optional[tuple[sp.Expr, sp.Expr]] = None
    expected_a: Optional[sp.Expr] = None
    breaklines: tuple = ()
    anchor_rings: int = 0
    description: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def level_set(self) -> LevelSet:
        if "ls" not in self._cache:
            self._cache["ls"] = LevelSet(_lambdify(self.phi), _lambdify_grad(self.phi))
        return self._cache["ls"]

    def source_exprs(self) -> tuple[sp.Expr, sp.Expr]:
        if self.f_override is not None:
            return self.f_override
        return tuple(
            sp.simplify(-b * (sp.diff(u, X, 2) + sp.diff(u, Y, 2))) for b, u in zip(self.beta, self.u)
        )

    def problem_data(self) -> ProblemData:
        if "data" in self._cache:
            return self._cache["data"]
        u = tuple(_lambdify(e) for e in self.u)
        gu = tuple(_lambdify_grad(e) for e in self.u)
        f = tuple(_lambdify(e) for e in self.source_exprs())
        b0, b1 = self.beta

        def a(p):
            return u[1](p) - u[0](p)

        def b(p, n):
            return ((b1 * gu[1](p) - b0 * gu[0](p)) * n).sum(axis=-1)

        data = ProblemData(beta=self.beta, f=f, g=u, a=a, b=b, exact=u, exact_grad=gu, breaklines=self.breaklines)
        self._cache["data"] = data
        return data

    def meshes(self, h_list=None):
        from .mesh import generate_triangular_mesh, load_polygonal_mesh

        if self.mesh_family == "voronoi":
            for name in self.mesh_files:
                with resources.as_file(resources.files("patchdg.data") / name) as path:
                    yield load_polygonal_mesh(path)
        else:
            for h in h_list or self.h_list:
                yield generate_triangular_mesh(self.domain, h)


def _r2():
    return X**2 + Y**2


def _example1(name="example1", voronoi=False) -> BenchmarkSpec:
    bo = 10
    r2 = _r2()
    u_out = sp.Rational(1, 4) * (1 - sp.Rational(1, 8 * bo) - sp.Rational(1, bo)) + sp.Rational(1, bo) * (r2**2 / 2 + r2)
    spec = BenchmarkSpec(
        name=name,
        phi=r2 - sp.Rational(1, 4),
        beta=(float(bo), 2.0),
        u=(u_out, r2),
        f_override=(-(8 * r2 + 4), sp.Integer(-8)),
        expected_a=sp.Integer(0),
        description="circle r = 0.5, beta = 10 outside / 2 inside, continuous solution",
    )
    if voronoi:
        spec.mesh_family = "voronoi"
        spec.mesh_files = ("voronoi_200.json", "voronoi_800.json")
        # on coarse Voronoi meshes some cut cells touch no uncut cell on one side
        spec.anchor_rings = 2
        spec.description += " (Voronoi meshes)"
    return spec


def _example3() -> BenchmarkSpec:
    return BenchmarkSpec(
        name="example3",
        phi=(X / sp.Rational(18, 27)) ** 2 + (Y / sp.Rational(10, 27)) ** 2 - 1,
        beta=(1.0, 1000.0),
        u=(5 * sp.exp(-X**2 - Y**2), sp.exp(X) * sp.cos(Y)),
        description="ellipse, beta = 1 outside / 1000 inside",
    )


def _example4() -> BenchmarkSpec:
    s = (X + sp.Rational(1, 2)) ** 2 + Y**2
    return BenchmarkSpec(
        name="example4",
        phi=(2 * s - X - sp.Rational(1, 2)) ** 2 - s + sp.Rational(1, 10),
        beta=(10.0, 1.0),
        u=(sp.Rational(1, 10) * sp.cos(1 - X**2 - Y**2), sp.sin(2 * X**2 + Y**2 + 2) + X),
        description="kidney-shaped interface, beta = 10 outside / 1 inside",
    )


def _example5() -> BenchmarkSpec:
    r = sp.sqrt(X**2 + Y**2)
    return BenchmarkSpec(
        name="example5",
        # kept unevaluated: sympy would rewrite sin(atan2(y, x)) as y/r, which is 0/0 at the origin
        phi=r - (sp.Rational(1, 2) + sp.sin(sp.atan2(Y, X), evaluate=False) / 7),
        beta=(10.0, 1.0),
        u=(sp.Rational(1, 10) * r**4 - sp.Rational(1, 100) * sp.log(2 * r), sp.exp(X**2 + Y**2)),
        description="r = 1/2 + sin(theta)/7, beta = 10 outside / 1 inside",
    )


def _example6() -> BenchmarkSpec:
    s = X + Y
    return BenchmarkSpec(
        name="example6",
        phi=sp.Piecewise((Y - 2 * X, s > 0), (Y + X / 2, True)),
        beta=(1.0, 1.0),
        u=(sp.Integer(8), sp.Piecewise((s, s > 0), (sp.sin(s), True))),
        f_override=(sp.Integer(0), sp.Piecewise((sp.Integer(0), s > 0), (2 * sp.sin(s), True))),
        # u1 and f1 switch formula across x + y = 0
        breaklines=(((1.0, 1.0), 0.0),),
        description="piecewise-linear interface with a kink at the origin, beta = 1",
    )


_FACTORIES = {
    "example1": _example1,
    "example2": lambda: _example1("example2", voronoi=True),
    "example3": _example3,
    "example4": _example4,
    "example5": _example5,
    "example6": _example6,
}
_REGISTRY: dict[str, BenchmarkSpec] = {}


def names() -> list[str]:
    return sorted(_FACTORIES)


def get(name: str) -> BenchmarkSpec:
    if name not in _FACTORIES:
        raise BenchmarkError(f"unknown benchmark {name!r}; registered: {', '.join(names())}")
    if name not in _REGISTRY:
        _REGISTRY[name] = _FACTORIES[name]()
    return _REGISTRY[name]


# ----------------------------------------------------------------------
# consistency checks


@dataclass
class ConsistencyReport:
    name: str
    n_gamma: int
    max_jump_error: float
    max_flux_error: float
    max_source_error: float
    max_abs_jump: float
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def sample_interface(spec: BenchmarkSpec, samples: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Points on the zero level set and unit normals pointing into side 0."""
    rng = np.random.default_rng(seed)
    ls = spec.level_set
    x0, x1, y0, y1 = spec.domain
    pts, nrm = [], []
    tries = 0
    while len(pts) < samples and tries < 50 * samples:
        tries += 1
        q = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        g = ls.grad(q)[0]
        ng = np.hypot(*g)
        if not np.isfinite(ng) or ng == 0:
            continue
        try:
            p = _project_to_interface(ls, q, g / ng, 0.5)
        except Exception:
            continue
        if not (x0 < p[0] < x1 and y0 < p[1] < y1) or abs(ls.value(p)) > 1e-12:
            continue
        gp = ls.grad(p)[0]
        if not np.all(np.isfinite(gp)) or np.hypot(*gp) == 0:
            continue
        pts.append(p)
        nrm.append(gp / np.hypot(*gp))
    return np.array(pts).reshape(-1, 2), np.array(nrm).reshape(-1, 2)


def _fd_source(u: Callable, beta: float, p: np.ndarray, step: float) -> np.ndarray:
    """``-beta * laplacian(u)`` by the fourth-order five-point stencil per direction."""
    lap = -5.0 * u(p)
    for d in np.array([[step, 0.0], [0.0, step]]):
        lap = lap + (16 * (u(p + d) + u(p - d)) - (u(p + 2 * d) + u(p - 2 * d))) / 12
    return -beta * lap / step**2


def _away_from_breaklines(spec: BenchmarkSpec, q: np.ndarray, dist: float) -> np.ndarray:
    far = np.ones(len(q), dtype=bool)
    for normal, offset in spec.breaklines:
        nn = np.asarray(normal, dtype=float)
        far &= np.abs(q @ nn - offset) / np.linalg.norm(nn) > dist
    return far


def _fd_normal_derivative(u: Callable, p: np.ndarray, n: np.ndarray, step: float) -> np.ndarray:
    d = step * n
    return (8 * (u(p + d) - u(p - d)) - (u(p + 2 * d) - u(p - 2 * d))) / (12 * step)


def verify_benchmark_consistency(spec: BenchmarkSpec, samples: int = 200, data: ProblemData | None = None, strict: bool = False) -> ConsistencyReport:
    """Check interface jump data, flux jump data and source terms at random samples.

    Jumps are checked against the registered closed form when one exists
    (e.g. a continuous solution), the flux jump against fourth-order
    finite differences of the exact pieces, and ``f`` against a
    fourth-order Laplacian (relative to ``max(1, |f|)``).
    """
    data = data or spec.problem_data()
    pts, nrm = sample_interface(spec, samples)
    violations = []
    u0, u1 = data.exact
    a_vals = data.a(pts)
    a_ref = _lambdify(spec.expected_a)(pts) if spec.expected_a is not None else u1(pts) - u0(pts)
    jump_err = float(np.abs(a_vals - a_ref).max()) if len(pts) else 0.0
    if jump_err >= 1e-10:
        violations.append(f"a: jump data differs from u1 - u0 by {jump_err:.2e}")

    step = 1e-3
    keep = _away_from_breaklines(spec, pts, 4 * step)
    fp, fn = pts[keep], nrm[keep]
    flux_ref = np.zeros(len(fp))
    for side, sgn in ((1, 1.0), (0, -1.0)):
        flux_ref += sgn * data.beta[side] * _fd_normal_derivative(data.exact[side], fp, fn, step)
    flux_err = float(np.abs(data.b(fp, fn) - flux_ref).max()) if len(fp) else 0.0
    if flux_err >= 1e-8:
        violations.append(f"b: flux jump differs from finite differences by {flux_err:.2e}")

    rng = np.random.default_rng(1)
    x0, x1, y0, y1 = spec.domain
    fd_step = 5e-3
    # a large pool so that a small subdomain still gets ``samples`` points
    q = np.column_stack([rng.uniform(x0, x1, 50 * samples), rng.uniform(y0, y1, 50 * samples)])
    # keep the stencil away from the interface and from kinks of the data
    far = _away_from_breaklines(spec, q, 4 * fd_step)
    phi = spec.level_set(q)
    src_err = 0.0
    for side in (0, 1):
        sel = np.flatnonzero(far & ((phi > 0.05) if side == 0 else (phi < -0.05)))[:samples]
        if not sel.size:
            violations.append(f"f: no side-{side} sample points away from the interface")
            continue
        p = q[sel]
        f_fd = _fd_source(data.exact[side], data.beta[side], p, fd_step)
        err = np.abs(data.f[side](p) - f_fd) / np.maximum(1.0, np.abs(f_fd))
        src_err = max(src_err, float(err.max()))
    if src_err >= 1e-6:
        violations.append(f"f: source differs from -div(beta grad u) by {src_err:.2e}")

    report = ConsistencyReport(
        spec.name, len(pts), jump_err, flux_err, src_err, float(np.abs(a_vals).max()) if len(pts) else 0.0, violations
    )
    if strict and violations:
        raise BenchmarkError(f"{spec.name}: " + "; ".join(violations))
    return report
