"""Generate the centroidal Voronoi meshes of [-1, 1]^2 shipped as package data.

Seeds are reflected across the four sides so every bounded Voronoi cell of
an original seed is already clipped to the square. A few Lloyd sweeps move
the seeds towards cell centroids for better shape regularity. Seeds are
redrawn until the circular interface of the Voronoi benchmark can be
classified on the mesh (one crossing per face, an anchor for every cut
cell within the benchmark's anchor search radius).
"""

import argparse
import json
from pathlib import Path

import numpy as np
from scipy.spatial import Voronoi

from patchdg import benchmarks
from patchdg.exceptions import GeometryError
from patchdg.interface import classify
from patchdg.mesh import mesh_from_dict, polygon_centroid, regularity_report

DOMAIN = (-1.0, 1.0, -1.0, 1.0)


def _mirror(seeds):
    x0, x1, y0, y1 = DOMAIN
    out = [seeds]
    for axis, lo, hi in ((0, x0, x1), (1, y0, y1)):
        for wall in (lo, hi):
            m = seeds.copy()
            m[:, axis] = 2 * wall - m[:, axis]
            out.append(m)
    return np.vstack(out)


def voronoi_cells(seeds):
    vor = Voronoi(_mirror(seeds))
    polys = []
    for i in range(len(seeds)):
        region = vor.regions[vor.point_region[i]]
        poly = vor.vertices[region]
        c = poly.mean(axis=0)
        order = np.argsort(np.arctan2(poly[:, 1] - c[1], poly[:, 0] - c[0]))
        polys.append(np.clip(poly[order], -1.0, 1.0))
    return polys


def lloyd(seeds, sweeps):
    for _ in range(sweeps):
        seeds = np.array([polygon_centroid(p) for p in voronoi_cells(seeds)])
    return seeds


def to_mesh_dict(polys, digits=12):
    index, nodes, cells = {}, [], []
    for poly in polys:
        cell = []
        for x, y in poly:
            key = (round(float(x), digits), round(float(y), digits))
            if key not in index:
                index[key] = len(nodes)
                nodes.append([key[0], key[1]])
            j = index[key]
            if not cell or cell[-1] != j:
                cell.append(j)
        if cell[0] == cell[-1]:
            cell.pop()
        cells.append(cell)
    return {"nodes": nodes, "cells": cells}


def make(n_cells, seed, sweeps):
    rng = np.random.default_rng(seed)
    seeds = lloyd(rng.uniform(-1.0, 1.0, size=(n_cells, 2)), sweeps)
    return to_mesh_dict(voronoi_cells(seeds))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src" / "patchdg" / "data"))
    ap.add_argument("--cells", type=int, nargs="+", default=[200, 800])
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--sweeps", type=int, default=30)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = benchmarks.get("example2")
    for n in args.cells:
        for attempt in range(100):
            doc = make(n, args.seed + 1000 * attempt + n, args.sweeps)
            mesh = mesh_from_dict(doc)
            try:
                classify(mesh, spec.level_set, anchor_rings=spec.anchor_rings)
                break
            except GeometryError:
                continue
        else:
            raise SystemExit(f"no admissible {n}-cell mesh found")
        rep = regularity_report(mesh)
        (out / f"voronoi_{n}.json").write_text(json.dumps(doc))
        print(f"voronoi_{n}.json: {mesh.n_cells} cells, attempt {attempt}, h={mesh.h:.4f}, rho_v={rep.rho_v:.3f}, rho_s={rep.rho_s:.3f}")


if __name__ == "__main__":
    main()
