"""Command line entry point: ``patchdg solve | report | check``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from fractions import Fraction

from . import benchmarks
from .exceptions import PatchDGError
from .interface import default_n_sub, verify_assumptions
from .runner import RunConfig, efficiency_report, run_benchmark


def parse_h(text: str):
    """``auto`` or a comma separated list such as ``1/5,1/10,0.05``."""
    if text == "auto":
        return None
    try:
        return [float(Fraction(t.strip())) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad mesh size list {text!r}: {exc}") from exc


def _common(p):
    p.add_argument("--example", required=True, help="benchmark name (" + ", ".join(benchmarks.names()) + ")")
    p.add_argument("--h", type=parse_h, default=None, help="mesh sizes, e.g. 1/5,1/10,1/20, or 'auto'")
    p.add_argument("--eta", type=float, default=None, help="penalty (default 10 m^2 max beta)")
    p.add_argument("--penalty-weighting", choices=["beta", "uniform"], default="beta")
    p.add_argument("--patch-target", type=int, default=None)
    p.add_argument("--nsub", type=int, default=None, help="interface polyline pieces per cut cell")
    p.add_argument("--anchor-rings", type=int, default=None)
    p.add_argument("--solver", choices=["direct", "cg"], default="direct")
    p.add_argument("--solver-tol", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="patchdg", description="Unfitted patch-reconstruction DG for elliptic interface problems")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="convergence sweep for one benchmark and degree")
    _common(p)
    p.add_argument("--order", type=int, required=True, help="polynomial degree m")
    p.add_argument("--condition", action="store_true", help="log extreme eigenvalues of every system")
    p.add_argument("--out", default=None, help="directory for errors.csv, orders.csv and run.json")

    p = sub.add_parser("report", help="error against number of unknowns")
    _common(p)
    p.add_argument("--efficiency", action="store_true", required=True)
    p.add_argument("--orders", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--out", default=None)

    p = sub.add_parser("check", help="benchmark data consistency and mesh assumptions")
    p.add_argument("--example", required=True)
    p.add_argument("--h", type=parse_h, default=None)
    p.add_argument("--samples", type=int, default=200)
    return ap


def _config(args, m) -> dict:
    return dict(
        benchmark=args.example,
        m=m,
        h_list=args.h,
        eta=args.eta,
        penalty_weighting=args.penalty_weighting,
        patch_target=args.patch_target,
        n_sub=args.nsub,
        anchor_rings=args.anchor_rings,
        solver=args.solver,
        solver_tol=args.solver_tol,
    )


def _fmt(x) -> str:
    return "-" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.3e}" if abs(x) < 0.01 or abs(x) > 1e3 else f"{x:.3f}"


def cmd_solve(args) -> int:
    cfg = RunConfig(**_config(args, args.order), condition=args.condition, out=args.out)
    results = run_benchmark(cfg)
    print(f"{'h':>10} {'dofs':>8} {'L2 error':>11} {'order':>6} {'DG error':>11} {'order':>6}")
    failed = 0
    for r in results:
        if r.report is None:
            failed += 1
            print(f"failed at stage {r.stage}: {r.error}")
            continue
        e = r.report
        print(f"{e.h:10.4g} {e.n_dof:8d} {e.l2_error:11.4e} {_fmt(e.l2_order):>6} {e.dg_error:11.4e} {_fmt(e.dg_order):>6}")
        if "condition" in r.stats:
            print(f"{'':10} condition estimate {r.stats['condition']:.3e}")
    return 1 if failed else 0


def cmd_report(args) -> int:
    overrides = _config(args, 1)
    for key in ("benchmark", "m", "h_list"):
        overrides.pop(key)
    curves = efficiency_report(args.example, args.orders, args.h, args.out, **overrides)
    for m, pts in curves.items():
        for n, e in pts:
            print(f"m={m} dofs={n} l2={e:.4e}")
    return 0


def cmd_check(args) -> int:
    spec = benchmarks.get(args.example)
    rep = benchmarks.verify_benchmark_consistency(spec, args.samples)
    print(f"{spec.name}: jump {rep.max_jump_error:.2e}, flux {rep.max_flux_error:.2e}, source {rep.max_source_error:.2e}")
    status = 0
    for v in rep.violations:
        print(f"  data: {v}")
        status = 1
    hs = args.h or list(spec.h_list)
    meshes = spec.meshes() if spec.mesh_family == "voronoi" else spec.meshes(hs)
    for mesh in meshes:
        ar = verify_assumptions(mesh, spec.level_set, default_n_sub(1))
        print(f"  mesh h={mesh.h:.4g}: {len(ar.violations)} assumption violations")
        for v in ar.violations[:5]:
            print(f"    assumption {v.assumption}, cell {v.cell}: {v.message}")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"solve": cmd_solve, "report": cmd_report, "check": cmd_check}[args.command](args)
    except PatchDGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
