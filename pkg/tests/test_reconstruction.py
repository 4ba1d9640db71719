import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from patchdg.exceptions import UnisolvenceError
from patchdg.error_analysis import l2_error
from patchdg.interface import CUT
from patchdg.polynomials import dim_poly, exponents
from patchdg.reconstruction import (
    evaluate_basis,
    evaluate_basis_gradient,
    evaluate_function,
    interpolate,
    least_squares_map,
)

from conftest import line, make_space


def poly_eval(coef, expo, x, y):
    """Evaluate sum c_ab x^a y^b with plain loops."""
    out = np.zeros_like(x)
    for c, (a, b) in zip(coef, expo):
        out = out + c * x**a * y**b
    return out


def test_one_dimensional_fit():
    x = np.array([-0.625, -0.375, -0.125])
    C = least_squares_map(x, 1)
    assert np.allclose(C @ x, [0.0, 1.0], atol=1e-14)
    assert np.allclose(C @ np.ones(3), [1.0, 0.0], atol=1e-14)


def test_underdetermined_fit_rejected():
    with pytest.raises(UnisolvenceError):
        least_squares_map(np.array([[0.0, 0.0], [1.0, 0.0]]), 1)
    with pytest.raises(UnisolvenceError):
        least_squares_map(np.array([[t, t] for t in range(4)], float), 1)


@pytest.fixture(scope="module", params=[1, 2, 3])
def space(request):
    return make_space("example1", 0.2, request.param)


@given(seed=st.integers(0, 2**31))
def test_polynomial_reproduction(space, seed):
    mesh, topo, sp_ = space
    m = sp_.m
    rng = np.random.default_rng(seed)
    coef = rng.normal(size=dim_poly(m))
    expo = exponents(m)
    for b in sp_.bases[:: max(1, len(sp_.bases) // 25)]:
        nodes = b.patch.nodes
        vals = poly_eval(coef, expo, nodes[:, 0], nodes[:, 1])
        probe = mesh.barycenters[b.patch.members] + 0.01
        got = b.values(probe) @ vals
        ref = poly_eval(coef, expo, probe[:, 0], probe[:, 1])
        assert np.allclose(got, ref, rtol=1e-9, atol=1e-9 * np.abs(vals).max())


def test_partition_of_unity(space):
    mesh, topo, sp_ = space
    rng = np.random.default_rng(3)
    for b in sp_.bases[::7]:
        x = rng.uniform(-1, 1, size=(10, 2))
        assert np.allclose(b.values(x).sum(axis=1), 1.0, atol=1e-10)
        assert np.allclose(b.gradients(x).sum(axis=1), 0.0, atol=1e-9)


def test_gradients_match_finite_differences(space):
    mesh, topo, sp_ = space
    rng = np.random.default_rng(5)
    d = 1e-6
    for b in sp_.bases[::11]:
        x = rng.uniform(-0.5, 0.5, size=(4, 2))
        g = b.gradients(x)
        for axis in (0, 1):
            e = np.zeros(2)
            e[axis] = d
            fd = (b.values(x + e) - b.values(x - e)) / (2 * d)
            assert np.allclose(g[..., axis], fd, atol=1e-6 * max(1.0, np.abs(fd).max()))


def test_interpolant_of_linear_function(space):
    mesh, topo, sp_ = space
    g = lambda p: p[:, 0] + p[:, 1]  # noqa: E731
    u = interpolate(sp_, g, g)
    rng = np.random.default_rng(0)
    for k in range(0, mesh.n_cells, 9):
        for side in (0, 1):
            if not topo.in_side(k, side):
                continue
            x = mesh.barycenters[k] + rng.uniform(-0.02, 0.02, size=(3, 2))
            assert np.allclose(evaluate_function(sp_, u, k, side, x), g(x), atol=1e-12)
            gr, dofs = evaluate_basis_gradient(sp_, k, side, x[0])
            assert np.allclose(gr.T @ u[dofs], [1.0, 1.0], atol=1e-11)


def test_interpolant_of_one_is_all_ones(space):
    _, _, sp_ = space
    u = interpolate(sp_, lambda p: np.ones(len(p)), lambda p: np.ones(len(p)))
    assert np.array_equal(u, np.ones(sp_.n_dof))


def test_dof_layout(space):
    mesh, topo, sp_ = space
    n_cut = len(topo.cut_indices)
    assert sp_.n_dof == mesh.n_cells + n_cut
    for k in topo.cut_indices:
        assert (sp_.dof_index[k] >= 0).all()
    pure = np.flatnonzero(topo.cell_class != CUT)
    assert ((sp_.dof_index[pure] >= 0).sum(axis=1) == 1).all()
    assert sorted(sp_.dof_index[sp_.dof_index >= 0].tolist()) == list(range(sp_.n_dof))


def test_cut_cell_uses_anchor_basis(space):
    mesh, topo, sp_ = space
    for k in topo.cut_indices[:10]:
        for side in (0, 1):
            a = topo.anchor(int(k), side)
            assert sp_.basis(int(k), side) is sp_.basis(a, side)
            x = mesh.barycenters[k]
            v1, d1 = evaluate_basis(sp_, int(k), side, x)
            v2, d2 = evaluate_basis(sp_, a, side, x)
            assert np.array_equal(d1, d2) and np.allclose(v1, v2)


def test_piecewise_polynomial_is_reproduced():
    m = 2
    mesh, topo, sp_ = make_space(line(1.0, -0.5, 0.1), 0.2, m)
    g0 = lambda p: 1 + p[:, 0] ** 2 - 3 * p[:, 0] * p[:, 1]  # noqa: E731
    g1 = lambda p: -2 + p[:, 1] ** 2 + p[:, 0]  # noqa: E731
    u = interpolate(sp_, g0, g1)
    assert l2_error(u, sp_, topo, (g0, g1)) < 1e-11


def test_interpolation_order_quadratic():
    g = lambda p: np.sin(2 * p[:, 0]) * np.exp(p[:, 1])  # noqa: E731
    errs = []
    for h in (0.1, 0.05):
        mesh, topo, sp_ = make_space("example1", h, 2)
        errs.append(l2_error(interpolate(sp_, g, g), sp_, topo, g))
    order = np.log2(errs[0] / errs[1])
    assert 2.5 < order < 3.5


def test_dump_coefficients(tmp_path, space):
    _, _, sp_ = space
    sp_.dump_coefficients(tmp_path)
    files = sorted(tmp_path.glob("patch_*.csv"))
    assert len(files) == len(sp_.bases)
    b = sp_.bases[0]
    k, side = b.patch.anchor
    back = np.loadtxt(tmp_path / f"patch_{k}_{side}.csv", delimiter=",", ndmin=2)
    assert np.allclose(back, b.coeff_map)
