import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from patchdg import benchmarks
from patchdg.exceptions import InvalidParameterError, MeshError
from patchdg.mesh import (
    BOUNDARY,
    generate_triangular_mesh,
    load_polygonal_mesh,
    mesh_from_dict,
    mesh_to_dict,
    polygon_signed_area,
    regularity_report,
    save_polygonal_mesh,
)

from conftest import SQUARE


def brute_force_faces(cells):
    """Count every undirected edge and how many cells use it."""
    count = {}
    for c in cells:
        c = [int(v) for v in c]
        for a, b in zip(c, c[1:] + c[:1]):
            key = (min(a, b), max(a, b))
            count[key] = count.get(key, 0) + 1
    return count


@pytest.mark.parametrize("h, n", [(0.2, 200), (0.1, 800), (2.0, 2)])
def test_uniform_mesh_cell_count(h, n):
    mesh = generate_triangular_mesh(SQUARE, h)
    assert mesh.n_cells == n
    assert all(len(c) == 3 for c in mesh.cells)


def test_coarsest_mesh_diameter():
    mesh = generate_triangular_mesh(SQUARE, 2.0)
    assert mesh.h == pytest.approx(2 * math.sqrt(2))


@pytest.mark.parametrize("h", [0.0, -0.1, 3.0, float("nan")])
def test_invalid_mesh_size(h):
    with pytest.raises(InvalidParameterError):
        generate_triangular_mesh(SQUARE, h)


def test_face_counts_against_edge_enumeration(mesh5):
    count = brute_force_faces(mesh5.cells)
    # 11 x 10 horizontal + 10 x 11 vertical + 100 diagonal edges
    assert mesh5.n_faces == len(count) == 320
    assert len(mesh5.interior_faces) == sum(v == 2 for v in count.values()) == 280
    assert mesh5.n_nodes - mesh5.n_faces + mesh5.n_cells + 1 == 2
    two = generate_triangular_mesh(SQUARE, 2.0)
    assert two.n_faces == 5 and len(two.interior_faces) == 1


def test_single_cell_has_only_boundary_faces():
    mesh = mesh_from_dict({"nodes": [[0, 0], [1, 0], [1, 1], [0, 1]], "cells": [[0, 1, 2, 3]]})
    assert mesh.n_faces == 4
    assert (mesh.face_cells[:, 1] == BOUNDARY).all()
    assert mesh.areas[0] == pytest.approx(1.0)


def test_handshake_and_area(mesh5):
    mesh = mesh5
    sides = sum(len(c) for c in mesh.cells)
    assert sides == 2 * len(mesh.interior_faces) + len(mesh.boundary_faces)
    assert mesh.areas.sum() == pytest.approx(4.0, rel=1e-12)
    for f in mesh.interior_faces:
        k, l = mesh.face_cells[f]
        assert f in mesh.cell_faces[k] and f in mesh.cell_faces[l]


def test_interior_face_normals_opposite(mesh5):
    mesh = mesh5
    for f in mesh.interior_faces[:50]:
        k, l = mesh.face_cells[f]
        nk = mesh.outward_normal(k, list(mesh.cell_faces[k]).index(f))
        nl = mesh.outward_normal(l, list(mesh.cell_faces[l]).index(f))
        assert np.allclose(nk, -nl)


def test_generation_is_deterministic():
    a = generate_triangular_mesh(SQUARE, 0.1)
    b = generate_triangular_mesh(SQUARE, 0.1)
    assert np.array_equal(a.nodes, b.nodes)
    assert all(np.array_equal(x, y) for x, y in zip(a.cells, b.cells))
    assert np.array_equal(a.faces, b.faces)


@given(
    w=st.floats(0.5, 3.0),
    hgt=st.floats(0.5, 3.0),
    nx=st.integers(1, 8),
)
def test_rectangle_mesh_properties(w, hgt, nx):
    h = min(w, hgt) / nx
    mesh = generate_triangular_mesh((0.0, w, 0.0, hgt), h)
    cx = math.ceil(w / h - 1e-9)
    cy = math.ceil(hgt / h - 1e-9)
    assert mesh.n_cells == 2 * cx * cy
    assert mesh.areas.sum() == pytest.approx(w * hgt, rel=1e-12)
    assert (mesh.areas > 0).all()
    assert mesh.h <= h * math.sqrt(2) * (1 + 1e-9)
    count = brute_force_faces(mesh.cells)
    assert mesh.n_faces == len(count)


def test_clockwise_cell_is_reversed():
    mesh = mesh_from_dict({"nodes": [[0, 0], [0, 1], [1, 1], [1, 0]], "cells": [[0, 1, 2, 3]]})
    assert polygon_signed_area(mesh.cell_points(0)) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "doc, match",
    [
        ({"nodes": [[0, 0], [1, 0], [1, 1]], "cells": [[0, 1, 1]]}, "cell 0"),
        ({"nodes": [[0, 0], [1, 0], [0, 1], [1, 1]], "cells": [[0, 1, 2, 3]]}, "not a simple"),
        ({"nodes": [[0, 0], [1, 0], [0, 1], [5, 5]], "cells": [[0, 1, 2]]}, "dangling"),
        ({"nodes": [[0, 0], [1, 0], [0, 1]], "cells": [[0, 1, 7]]}, "outside"),
        ({"cells": [[0, 1, 2]]}, "malformed"),
    ],
)
def test_invalid_mesh_documents(doc, match):
    with pytest.raises(MeshError, match=match):
        mesh_from_dict(doc)


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{nodes:")
    with pytest.raises(MeshError):
        load_polygonal_mesh(p)


def test_json_round_trip(tmp_path, mesh5):
    p = tmp_path / "m.json"
    save_polygonal_mesh(mesh5, p)
    back = load_polygonal_mesh(p)
    assert np.array_equal(back.nodes, mesh5.nodes)
    assert all(np.array_equal(x, y) for x, y in zip(back.cells, mesh5.cells))
    assert mesh_to_dict(back) == json.loads(p.read_text())


def test_uniform_mesh_regularity(mesh5):
    rep = regularity_report(mesh5)
    assert rep.rho_v == pytest.approx(1 / math.sqrt(2))
    assert rep.rho_s == pytest.approx(1.0)
    assert rep.tau > 0


@pytest.mark.parametrize("index", [0, 1])
def test_voronoi_fixtures(index):
    mesh = list(benchmarks.get("example2").meshes())[index]
    assert mesh.n_cells == (200, 800)[index]
    # Euler's relation with the outer face
    assert mesh.n_nodes - mesh.n_faces + mesh.n_cells + 1 == 2
    assert mesh.areas.sum() == pytest.approx(4.0, rel=1e-10)
    rep = regularity_report(mesh)
    assert rep.rho_v > 0 and rep.rho_s > 0 and rep.tau > 0
    assert max(len(c) for c in mesh.cells) > 3
