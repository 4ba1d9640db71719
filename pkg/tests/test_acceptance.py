"""Acceptance criteria 1 to 10, each reported as one PASS/FAIL line."""

import math
import time

import numpy as np

from patchdg import benchmarks
from patchdg.assembly import ProblemData, assemble, galerkin_orthogonality_check
from patchdg.interface import classify
from patchdg.mesh import generate_triangular_mesh
from patchdg.patch import build_patches, estimate_lambda
from patchdg.polynomials import dim_poly, exponents
from patchdg.reconstruction import GlobalSpace, least_squares_map
from patchdg.runner import RunConfig, run_benchmark, run_mesh
from patchdg.solver import solve

from conftest import SQUARE, piecewise_poly_data

LINES = []


def record(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append((n, line))
    print(line)
    return ok


def space_for(ls, h, m, n_sub=4):
    mesh = generate_triangular_mesh(SQUARE, h)
    topo = classify(mesh, ls, n_sub)
    return mesh, topo, GlobalSpace(topo, build_patches(mesh, topo, m))


def random_in_triangle(tri, n, rng):
    r = rng.random((n, 2))
    flip = r.sum(axis=1) > 1
    r[flip] = 1 - r[flip]
    return tri[0] + r[:, :1] * (tri[1] - tri[0]) + r[:, 1:] * (tri[2] - tri[0])


def test_criterion_01_reconstruction_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    ls = benchmarks.get("example1").level_set
    worst_rep, worst_pou = 0.0, 0.0
    for m in (1, 2, 3):
        mesh, topo, space = space_for(ls, 0.2, m)
        expo = exponents(m)
        for b in space.bases:
            coef = rng.normal(size=dim_poly(m))
            nodes = b.patch.nodes
            vals = sum(c * nodes[:, 0] ** i * nodes[:, 1] ** j for c, (i, j) in zip(coef, expo))
            probe = np.vstack([random_in_triangle(mesh.cell_points(int(k)), 5, rng) for k in b.patch.members])
            ref = sum(c * probe[:, 0] ** i * probe[:, 1] ** j for c, (i, j) in zip(coef, expo))
            err = np.abs(b.values(probe) @ vals - ref).max() / np.abs(ref).max()
            worst_rep = max(worst_rep, float(err))
        for (k, side) in space.table.patches:
            x = random_in_triangle(mesh.cell_points(k), 100, rng)
            s = space.basis(k, side).values(x).sum(axis=1)
            worst_pou = max(worst_pou, float(np.abs(s - 1).max()))
    elapsed = time.perf_counter() - t0
    ok = worst_rep < 1e-9 and worst_pou < 1e-10 and elapsed < 10
    record(1, ok, f"reproduction {worst_rep:.1e} (< 1e-9), partition of unity {worst_pou:.1e} (< 1e-10), {elapsed:.1f} s (< 10 s)")
    assert ok


def test_criterion_02_worked_1d_example(strip_fixture):
    mesh, topo = strip_fixture
    table = build_patches(mesh, topo, 1, 3, check=False)
    # K_j of the worked example is cell j - 1
    s0_k3 = sorted(int(c) + 1 for c in table[(2, 0)].members)
    s1_k5 = sorted(int(c) + 1 for c in table[(4, 1)].members)
    shared = table[(3, 0)] is table[(2, 0)] and table[(3, 1)] is table[(4, 1)]
    p = table[(2, 0)]
    x = p.nodes[np.argsort(p.members), 0]
    C = least_squares_map(x, 1)
    lin = max(np.abs(C @ (a * x + b) - [b, a]).max() for a, b in ((1.0, 0.0), (-2.5, 0.75), (0.0, 3.0)))
    ok = s0_k3 == [2, 3, 4] and s1_k5 == [4, 5, 6] and shared and lin < 1e-13
    record(2, ok, f"S0(K3)={s0_k3}, S1(K4)=S1(K5)={s1_k5}, shared={shared}, linear data error {lin:.1e}")
    assert ok


def test_criterion_03_constant_reproduction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    pairs = [(1.0, 1.0), (10.0, 2.0), (1.0, 1000.0), (1000.0, 1.0), tuple(10 ** rng.uniform(-2, 3, 2))]
    ls = benchmarks.get("example1").level_set
    zero = lambda p: np.zeros(len(p))  # noqa: E731
    worst = 0.0
    for m in (1, 2, 3):
        mesh, topo, space = space_for(ls, 0.1, m)
        for beta in pairs:
            c = float(rng.uniform(-5, 5))
            data = ProblemData(beta=beta, f=zero, g=lambda p, c=c: np.full(len(p), c))
            u = solve(assemble(space, topo, data)).values
            worst = max(worst, float(np.abs(u - c).max()))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 30
    record(3, ok, f"max |u_h - c| = {worst:.1e} (< 1e-8) over m=1..3 and {len(pairs)} beta pairs, {elapsed:.1f} s (< 30 s)")
    assert ok


def test_criterion_04_galerkin_orthogonality():
    ls = benchmarks.get("example6").level_set
    res = {}
    for m in (1, 2, 3):
        mesh, topo, space = space_for(ls, 0.2, m)
        res[m] = galerkin_orthogonality_check(space, topo, piecewise_poly_data(m, (1.0, 1.0)))
    worst = max(res.values())
    ok = worst < 1e-8
    record(4, ok, "max residual " + ", ".join(f"m={m}: {r:.1e}" for m, r in res.items()) + " (< 1e-8)")
    assert ok


def sweep(name, m, hs, **kw):
    """Final L2 and DG orders of a sweep, or None when some mesh failed."""
    t0 = time.perf_counter()
    results = run_benchmark(RunConfig(name, m=m, h_list=hs, **kw))
    elapsed = time.perf_counter() - t0
    failed = [(r.stage, r.error) for r in results if r.report is None]
    reps = [r.report for r in results if r.report is not None]
    last = reps[-1] if len(reps) > 1 else None
    return last, failed, elapsed, results


def in_band(x, centre, tol=0.3):
    return x is not None and not math.isnan(x) and abs(x - centre) <= tol + 1e-12


def mark(ok):
    return "ok" if ok else "OUT"


H4 = [1 / 5, 1 / 10, 1 / 20, 1 / 40]
H3 = [1 / 5, 1 / 10, 1 / 20]


def test_criterion_05_example1_convergence():
    parts, ok = [], True
    for m in (1, 2, 3):
        last, failed, elapsed, _ = sweep("example1", m, H4)
        l2_ok, dg_ok = in_band(last.l2_order, m + 1), in_band(last.dg_order, m)
        ok &= not failed and l2_ok and dg_ok and elapsed < 300
        parts.append(
            f"m={m}: L2 {last.l2_order:.2f} [{m + 0.7:.1f}, {m + 1.3:.1f}] {mark(l2_ok)}, "
            f"DG {last.dg_order:.2f} [{m - 0.3:.1f}, {m + 0.3:.1f}] {mark(dg_ok)}, {elapsed:.0f} s"
        )
    record(5, ok, "; ".join(parts))
    assert ok


def _bands(name, ms, hs, **kw):
    parts, ok = [], True
    for m in ms:
        last, failed, _, results = sweep(name, m, hs, **kw)
        txt = f"{name} m={m}:"
        if failed:
            ok = False
            txt += f" stage '{failed[0][0]}' failed on {len(failed)} mesh(es) OUT;"
        if last is not None:
            l2_ok, dg_ok = in_band(last.l2_order, m + 1), in_band(last.dg_order, m)
            ok &= l2_ok and dg_ok
            txt += f" L2 {last.l2_order:.2f} {mark(l2_ok)}, DG {last.dg_order:.2f} {mark(dg_ok)}"
        parts.append(txt)
    return ok, parts, results


def test_criterion_06_examples_3_to_5():
    ok, parts = True, []
    for name in ("example3", "example4", "example5"):
        good, p, _ = _bands(name, (1, 2), H3)
        ok &= good
        parts += p
    record(6, ok, "; ".join(parts) + " (bands m+1 +- 0.3 and m +- 0.3)")
    assert ok


def test_criterion_07_example6_orders():
    bands = {1: ((1.8, 2.2), None), 2: ((2.7, 3.3), None), 3: ((3.2, 3.8), (2.2, 2.8))}
    parts, ok = [], True
    for m, (l2b, dgb) in bands.items():
        last, failed, _, _ = sweep("example6", m, H4)
        l2_ok = l2b[0] <= last.l2_order <= l2b[1]
        good = not failed and l2_ok
        txt = f"m={m}: L2 {last.l2_order:.2f} {list(l2b)} {mark(l2_ok)}"
        if dgb:
            dg_ok = dgb[0] <= last.dg_order <= dgb[1]
            good &= dg_ok
            txt += f", DG {last.dg_order:.2f} {list(dgb)} {mark(dg_ok)}"
        ok &= good
        parts.append(txt)
    record(7, ok, "; ".join(parts))
    assert ok


def test_criterion_08_high_contrast():
    ok, parts, conds = True, [], []
    for m in (1, 2):
        good, p, results = _bands("example3", (m,), H3, solver="direct", condition=True)
        ok &= good
        parts += p
        conds += [r.stats.get("condition", math.nan) for r in results]
    logged = all(np.isfinite(conds))
    ok &= logged
    record(8, ok, "; ".join(parts) + f"; direct solver, condition estimates {min(conds):.1e}..{max(conds):.1e}")
    assert ok


def test_criterion_09_lambda_bounded():
    ls = benchmarks.get("example1").level_set
    ratios, parts = {}, []
    for m in (1, 2, 3):
        lam = []
        for h in H4:
            mesh = generate_triangular_mesh(SQUARE, h)
            topo = classify(mesh, ls)
            table = build_patches(mesh, topo, m)
            lam.append(max(estimate_lambda(p, m, mesh=mesh) for p in table.unique()))
        ratios[m] = max(lam) / min(lam)
        parts.append(f"m={m}: max Lambda " + "/".join(f"{v:.2f}" for v in lam) + f" ratio {ratios[m]:.2f}")
    ok = max(ratios.values()) < 3
    record(9, ok, "; ".join(parts) + " (ratio < 3)")
    assert ok


def test_criterion_10_cross_solver():
    worst, parts = 0.0, []
    for name in benchmarks.names():
        spec = benchmarks.get(name)
        mesh = list(spec.meshes())[-1] if spec.mesh_family == "voronoi" else generate_triangular_mesh(SQUARE, 0.1)
        diffs = []
        for m in (1, 2, 3):
            r = run_mesh(spec, mesh, RunConfig(name, m=m), keep=True)
            system = r.stats["_objects"]["system"]
            x_direct = r.stats["_objects"]["solution"].values
            x_cg = solve(system, "cg", 1e-13).values
            diffs.append(float(np.abs(x_direct - x_cg).max()))
        worst = max(worst, max(diffs))
        parts.append(f"{name} {max(diffs):.1e}")
    ok = worst < 1e-8
    record(10, ok, "max |x_direct - x_cg| " + ", ".join(parts) + " (< 1e-8, m=1..3)")
    assert ok
