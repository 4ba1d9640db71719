import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from patchdg import benchmarks
from patchdg.assembly import ProblemData
from patchdg.interface import LevelSet, classify
from patchdg.mesh import generate_triangular_mesh
from patchdg.patch import build_patches
from patchdg.reconstruction import GlobalSpace

settings.register_profile("default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SQUARE = (-1.0, 1.0, -1.0, 1.0)


def circle(r=0.5, cx=0.0, cy=0.0):
    return LevelSet(
        lambda p: (p[:, 0] - cx) ** 2 + (p[:, 1] - cy) ** 2 - r * r,
        lambda p: np.column_stack([2 * (p[:, 0] - cx), 2 * (p[:, 1] - cy)]),
    )


def line(nx, ny, c):
    """phi = nx x + ny y - c."""
    return LevelSet(lambda p: nx * p[:, 0] + ny * p[:, 1] - c, lambda p: np.tile([nx, ny], (len(p), 1)).astype(float))


def make_space(name_or_ls, h, m, target=None, n_sub=4):
    """Mesh, topology and global space on the square for a benchmark name or a level set."""
    ls = benchmarks.get(name_or_ls).level_set if isinstance(name_or_ls, str) else name_or_ls
    mesh = generate_triangular_mesh(SQUARE, h)
    topo = classify(mesh, ls, n_sub)
    table = build_patches(mesh, topo, m, target)
    return mesh, topo, GlobalSpace(topo, table)


@pytest.fixture(scope="session")
def mesh5():
    return generate_triangular_mesh(SQUARE, 0.2)


@pytest.fixture(scope="session")
def ex1_space_m1():
    return make_space("example1", 0.2, 1)


@pytest.fixture(scope="session")
def strip_fixture():
    """Eight 0.25 x 0.25 squares along [-1, 1] x [0, 0.25] cut by x = -0.2 (Omega_0 on the left)."""
    from patchdg.mesh import PolygonalMesh

    xs = np.linspace(-1.0, 1.0, 9)
    nodes = np.array([[x, 0.0] for x in xs] + [[x, 0.25] for x in xs])
    cells = [(i, i + 1, 9 + i + 1, 9 + i) for i in range(8)]
    mesh = PolygonalMesh(nodes, cells)
    ls = LevelSet(lambda p: -0.2 - p[:, 0], lambda p: np.tile([-1.0, 0.0], (len(p), 1)))
    topo = classify(mesh, ls)
    return mesh, topo


def piecewise_poly_data(m, beta):
    """Piecewise P_m exact solution with matching source, jump and flux-jump data."""
    k = max(m, 1)

    def u0(p):
        return 1 + p[:, 0] ** k - 2 * p[:, 1] + 0.5 * p[:, 0] * p[:, 1] ** (k - 1)

    def u1(p):
        return -1 + 3 * p[:, 1] ** k + p[:, 0]

    def g0(p):
        gx = k * p[:, 0] ** (k - 1) + 0.5 * p[:, 1] ** (k - 1)
        gy = -2 + 0.5 * (k - 1) * p[:, 0] * p[:, 1] ** max(k - 2, 0)
        return np.column_stack([gx, gy])

    def g1(p):
        return np.column_stack([np.ones(len(p)), 3 * k * p[:, 1] ** (k - 1)])

    def lap0(p):
        return k * (k - 1) * p[:, 0] ** max(k - 2, 0) + 0.5 * (k - 1) * (k - 2) * p[:, 0] * p[:, 1] ** max(k - 3, 0)

    def lap1(p):
        return 3 * k * (k - 1) * p[:, 1] ** max(k - 2, 0)

    b0, b1 = beta
    data = ProblemData(
        beta=beta,
        f=(lambda p: -b0 * lap0(p), lambda p: -b1 * lap1(p)),
        g=(u0, u1),
        a=lambda p: u1(p) - u0(p),
        b=lambda p, n: ((b1 * g1(p) - b0 * g0(p)) * n).sum(axis=-1),
        exact=(u0, u1),
        exact_grad=(g0, g1),
    )
    return data


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line_ in sorted(lines):
            terminalreporter.write_line(line_[1])
