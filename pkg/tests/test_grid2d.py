import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from diracfem.grid2d import (QuadRule, SparseSystem, apply_dirichlet, assemble_stiffness,
                             assemble_volume_load, basis_reference_gradients, basis_values,
                             build_grid, cell_quadrature, fe_eval, fe_grad, interpolate,
                             local_stiffness, locate, q1_eval)
from diracfem.layer import Circle
from diracfem.solver import cg_solve


def test_grid_sizes():
    g = build_grid(4)
    assert (g.n_nodes, g.n_cells, g.h) == (25, 16, 0.25)
    assert build_grid(256).h == 2.0**-8


def test_single_interior_node():
    g = build_grid(2)
    assert g.interior_nodes.tolist() == [4]
    assert np.array_equal(g.nodes[4], [0.5, 0.5])


def test_rejects_small_grid():
    with pytest.raises(ValueError):
        build_grid(1)


def test_boundary_mask_matches_coordinates():
    g = build_grid(7)
    on = np.any((g.nodes == 0) | (g.nodes == 1), axis=1)
    assert np.array_equal(g.boundary_mask, on)


def test_cell_nodes_counterclockwise():
    g = build_grid(3)
    ll, lr, ur, ul = g.nodes[g.cell_nodes(np.array([4]))[0]]
    assert np.allclose([ll, lr, ur, ul], [[1 / 3, 1 / 3], [2 / 3, 1 / 3], [2 / 3, 2 / 3],
                                          [1 / 3, 2 / 3]])


def test_q1_eval_at_node_and_center():
    g = build_grid(4)
    cell, vals, grads = q1_eval(g, (0.25, 0.5))
    assert vals.tolist() == [1.0, 0.0, 0.0, 0.0]
    _, vals, _ = q1_eval(g, (0.375, 0.625))
    assert np.allclose(vals, 0.25, atol=1e-15)


def test_half_open_cells():
    g = build_grid(4)
    cells, _ = locate(g, np.array([[0.25, 0.25], [1.0, 1.0], [0.0, 0.999]]))
    assert cells.tolist() == [5, 15, 12]
    with pytest.raises(ValueError):
        locate(g, np.array([[1.0001, 0.5]]))


def test_partition_of_unity(rng):
    g = build_grid(13)
    P = rng.random((10_000, 2))
    _, ref = locate(g, P)
    vals = basis_values(ref[:, 0], ref[:, 1])
    grads = basis_reference_gradients(ref[:, 0], ref[:, 1])
    assert np.max(np.abs(vals.sum(axis=1) - 1)) <= 1e-14
    assert np.max(np.abs(grads.sum(axis=1))) <= 1e-14


def test_local_stiffness_matches_gauss_oracle():
    x, w = np.polynomial.legendre.leggauss(2)
    x, w = (x + 1) / 2, w / 2
    K = np.zeros((4, 4))
    for xi, wi in zip(x, w):
        for eta, wj in zip(x, w):
            G = basis_reference_gradients(xi, eta)
            K += wi * wj * G @ G.T
    assert np.allclose(K, local_stiffness(), atol=1e-15)
    assert np.allclose(local_stiffness() * 6, [[4, -1, -2, -1], [-1, 4, -1, -2],
                                               [-2, -1, 4, -1], [-1, -2, -1, 4]])


@pytest.mark.parametrize("n", [2, 5, 16])
def test_stiffness_symmetry_and_row_sums(n):
    A = assemble_stiffness(build_grid(n))
    assert (A != A.T).nnz == 0
    assert np.max(np.abs(A.sum(axis=1))) <= 1e-13


def test_volume_load_constants():
    g = build_grid(8)
    assert np.all(assemble_volume_load(g, lambda x, y: 0 * x) == 0)
    assert assemble_volume_load(g, lambda x, y: 1 + 0 * x).sum() == pytest.approx(1, abs=1e-12)
    b = assemble_volume_load(g, lambda x, y: x, cut=Circle((0.5, 0.5), 0.3))
    assert b.sum() == pytest.approx(0.5, abs=1e-12)


def test_cut_and_focus_quadrature_integrate_exactly():
    g = build_grid(8)
    quad = QuadRule()
    circle = Circle((0.5, 0.5), 0.3)
    _, _, xy, w = cell_quadrature(g, quad, circle, focus=circle.point(0.0))
    assert w.sum() == pytest.approx(1.0, abs=1e-13)
    assert np.sum(w * xy[:, 0] ** 2 * xy[:, 1]) == pytest.approx(1 / 6, abs=1e-13)
    _, ref = quad.reference(cut=True)
    assert np.all((ref > 0) & (ref < 1))


def test_dirichlet_two_by_two():
    g = build_grid(2)
    A = assemble_stiffness(g)
    red = apply_dirichlet(SparseSystem(A, np.ones(g.n_nodes)), g)
    assert red.matrix.shape == (1, 1)
    assert red.matrix[0, 0] == A[4, 4]


def test_dirichlet_expansion_and_spd(rng):
    g = build_grid(9)
    red = apply_dirichlet(SparseSystem(assemble_stiffness(g), np.zeros(g.n_nodes)), g)
    b = rng.standard_normal(red.matrix.shape[0])
    res = cg_solve((red.matrix, b), tol=1e-12)
    assert res.converged
    full = red.expand(res.x)
    assert np.all(full[g.boundary_mask] == 0.0)
    assert np.all(np.linalg.eigvalsh(red.matrix.toarray()) > 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_bilinear_reproduction(x, y):
    g = build_grid(6)
    pt = np.array([[x, y]])
    for fn in (lambda x, y: 1 + 0 * x, lambda x, y: x, lambda x, y: y,
               lambda x, y: x * y, lambda x, y: x + y):
        assert fe_eval(interpolate(g, fn), pt)[0] == pytest.approx(fn(x, y), abs=1e-14)


def test_constant_field_has_zero_gradient(rng):
    g = build_grid(5)
    field = interpolate(g, lambda x, y: 3.0 + 0 * x)
    assert np.max(np.abs(fe_grad(field, rng.random((50, 2))))) <= 1e-13


def test_galerkin_orthogonality(rng):
    g = build_grid(12)
    A = assemble_stiffness(g)
    b = assemble_volume_load(g, lambda x, y: np.sin(3 * x) * np.exp(y))
    red = apply_dirichlet(SparseSystem(A, b), g)
    res = cg_solve(red, tol=1e-13)
    u = red.expand(res.x)
    for _ in range(100):
        v = rng.standard_normal(g.n_nodes) * ~g.boundary_mask
        assert abs(v @ (A @ u) - v @ b) <= 1e-11 * np.linalg.norm(v) * np.linalg.norm(b)


def test_stiffness_is_csr():
    assert sp.isspmatrix_csr(assemble_stiffness(build_grid(3)))
