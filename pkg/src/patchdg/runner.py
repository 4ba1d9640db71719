"""Full pipeline: mesh -> classify -> patches -> space -> assemble -> solve -> errors."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import benchmarks
from .assembly import PenaltyConfig, assemble, default_order
from .error_analysis import DG_TERMS, ErrorReport, convergence_orders, error_order, error_report
from .exceptions import InvalidParameterError, PatchDGError
from .interface import classify, default_n_sub
from .mesh import PolygonalMesh
from .patch import build_patches, default_target
from .reconstruction import GlobalSpace
from .solver import condition_estimate, solve

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    benchmark: str
    m: int = 1
    h_list: Optional[list[float]] = None
    eta: Optional[float] = None
    penalty_weighting: str = "beta"
    patch_target: Optional[int] = None
    quad_order: Optional[int] = None
    error_quad_order: Optional[int] = None
    n_sub: Optional[int] = None
    anchor_rings: Optional[int] = None
    solver: str = "direct"
    solver_tol: Optional[float] = None
    condition: bool = False
    out: Optional[str] = None

    def __post_init__(self):
        if self.m < 0:
            raise InvalidParameterError("polynomial degree must be nonnegative")
        if self.h_list is not None:
            hs = list(self.h_list)
            if any(h <= 0 for h in hs) or any(b >= a for a, b in zip(hs, hs[1:])):
                raise InvalidParameterError(f"h list must be positive and strictly decreasing: {hs}")


@dataclass
class RunResult:
    report: Optional[ErrorReport]
    stats: dict = field(default_factory=dict)
    error: Optional[str] = None
    stage: Optional[str] = None


def run_mesh(spec: benchmarks.BenchmarkSpec, mesh: PolygonalMesh, config: RunConfig, h: float | None = None, keep=False) -> RunResult:
    """Run every stage on one mesh; a stage failure is captured, not raised."""
    m = config.m
    stats: dict = {}
    stage = "mesh"
    try:
        t0 = time.perf_counter()
        stage = "classify"
        rings = spec.anchor_rings if config.anchor_rings is None else config.anchor_rings
        topo = classify(mesh, spec.level_set, config.n_sub or default_n_sub(m), rings)
        stage = "patch"
        table = build_patches(mesh, topo, m, config.patch_target or default_target(m))
        stage = "space"
        space = GlobalSpace(topo, table)
        stage = "assemble"
        data = spec.problem_data()
        system = assemble(space, topo, data, PenaltyConfig(config.eta, config.penalty_weighting), config.quad_order or default_order(m))
        stage = "solve"
        sol = solve(system, config.solver, config.solver_tol)
        stage = "errors"
        rep = error_report(sol.values, space, topo, data, h=h if h is not None else mesh.h, order=config.error_quad_order or error_order(m))
        stats.update(
            n_cells=mesh.n_cells,
            n_cut=int(len(topo.cut_indices)),
            eta=system.eta,
            residual=sol.residual,
            augmented=len(table.augmented),
            max_cardinality=max(p.cardinality for p in table.unique()),
            min_cardinality=min(p.cardinality for p in table.unique()),
            seconds=time.perf_counter() - t0,
        )
        if config.condition:
            stage = "condition"
            est = condition_estimate(system)
            stats.update(lambda_min=est.lambda_min, lambda_max=est.lambda_max, condition=est.condition)
        result = RunResult(rep, stats)
        if keep:
            stats["_objects"] = dict(topology=topo, table=table, space=space, system=system, solution=sol)
        return result
    except PatchDGError as exc:
        logger.error("h=%s failed at stage %s: %s", h, stage, exc)
        return RunResult(None, stats, str(exc), stage)


def run_benchmark(config: RunConfig) -> list[RunResult]:
    """Convergence sweep over the configured meshes; writes CSV/JSON when ``out`` is set."""
    spec = benchmarks.get(config.benchmark)
    results = []
    for mesh, h in _mesh_sequence(spec, config):
        logger.info("%s m=%d h=%.4g (%d cells)", spec.name, config.m, h, mesh.n_cells)
        results.append(run_mesh(spec, mesh, config, h))
    ok = [r.report for r in results if r.report is not None]
    if ok:
        convergence_orders(ok)
    if config.out:
        write_outputs(config, results)
    return results


def _mesh_sequence(spec, config):
    if spec.mesh_family == "voronoi":
        for mesh in spec.meshes():
            yield mesh, mesh.h
    else:
        for h, mesh in zip(config.h_list or spec.h_list, spec.meshes(config.h_list)):
            yield mesh, h


FIELDS = ["h", "n_dof", "l2_error", "l2_order", "dg_error", "dg_order", *DG_TERMS]


def write_outputs(config: RunConfig, results: list[RunResult]) -> None:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [r.report.row() for r in results if r.report is not None]
    with open(out / "errors.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in FIELDS})
    with open(out / "orders.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "l2_order", "dg_order"])
        for row in rows[1:]:
            w.writerow([_fmt(row["h"]), _fmt(row["l2_order"]), _fmt(row["dg_order"])])
    echo = {
        "config": asdict(config),
        "failures": [{"stage": r.stage, "error": r.error} for r in results if r.error],
    }
    (out / "run.json").write_text(json.dumps(echo, indent=2, sort_keys=True))


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.10e}"


def efficiency_report(name: str, m_list, h_list=None, out: str | None = None, **overrides) -> dict[int, list[tuple[int, float]]]:
    """(n_dof, L2 error) curve for every degree in ``m_list``."""
    curves = {}
    for m in m_list:
        cfg = RunConfig(name, m=m, h_list=h_list, **overrides)
        res = run_benchmark(cfg)
        curves[m] = [(r.report.n_dof, r.report.l2_error) for r in res if r.report is not None]
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        with open(path / "efficiency.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "n_dof", "l2_error"])
            for m, pts in curves.items():
                for n, e in pts:
                    w.writerow([m, n, _fmt(e)])
    return curves
