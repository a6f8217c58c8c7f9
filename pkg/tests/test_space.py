import math

import numpy as np
import pytest

from gbhfem.mesh import build_structured_mesh
from gbhfem.space import (DIRICHLET, NEUMANN, FemFunction, FunctionSpace,
                          apply_dirichlet, eval_in_cell, interpolate,
                          quadrature)


def ref_monomial_integral(powers):
    """int over the reference simplex of prod x_i^p_i = prod(p_i!) / (sum p + d)!"""
    d = len(powers)
    num = 1.0
    for p in powers:
        num *= math.factorial(p)
    return num / math.factorial(sum(powers) + d)


def test_centroid_rules():
    r2 = quadrature(2, 1)
    assert r2.points.shape == (1, 3)
    assert np.allclose(r2.points[0], [1 / 3, 1 / 3, 1 / 3])
    assert r2.weights[0] == pytest.approx(0.5)
    r3 = quadrature(3, 1)
    assert np.allclose(r3.points[0], [0.25, 0.25, 0.25, 0.25])
    assert r3.weights.sum() == pytest.approx(1 / 6, abs=1e-14)


def test_degree4_integrates_x2y2():
    r = quadrature(2, 4)
    val = (r.weights * r.points[:, 1] ** 2 * r.points[:, 2] ** 2).sum()
    assert val == pytest.approx(1 / 180, rel=1e-13)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5, 6])
def test_monomial_exactness(dim, degree):
    r = quadrature(dim, degree)
    assert r.exactness_degree >= degree
    assert (r.weights > 0).all()
    ref_vol = 0.5 if dim == 2 else 1 / 6
    assert abs(r.weights.sum() - ref_vol) < 1e-14
    xyz = r.points[:, 1:]
    for powers in np.ndindex(*[r.exactness_degree + 1] * dim):
        if sum(powers) > r.exactness_degree:
            continue
        val = (r.weights * np.prod(xyz ** np.array(powers), axis=1)).sum()
        assert val == pytest.approx(ref_monomial_integral(powers), rel=1e-12, abs=1e-15)


def test_quadrature_rejects_unsupported_degree():
    for degree in (0, -1, 7):
        with pytest.raises(ValueError):
            quadrature(2, degree)


def test_interpolate_zero_and_center():
    mesh = build_structured_mesh(2, 4)
    space = FunctionSpace(mesh)
    z = interpolate(lambda x, t: np.zeros(x.shape[0]), 0.0, space)
    assert not z.coeffs.any()

    f = interpolate(lambda x, t: np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1]),
                    0.0, space)
    center = np.flatnonzero((mesh.vertices == 0.5).all(axis=1))[0]
    assert f.coeffs[center] == pytest.approx(1.0)
    for b in mesh.boundary_vertices:
        assert f.coeffs[b] == pytest.approx(0.0, abs=1e-15)


def test_interpolate_scalar_signature():
    mesh = build_structured_mesh(2, 2)
    space = FunctionSpace(mesh)
    f = interpolate(lambda x, t: x[0] + 2.0 * x[1] + t, 1.5, space)
    assert f.coeffs[0] == pytest.approx(1.5)
    assert np.allclose(f.coeffs, mesh.vertices @ [1.0, 2.0] + 1.5)


def test_interpolate_reports_bad_vertex():
    mesh = build_structured_mesh(2, 2)
    space = FunctionSpace(mesh)
    with pytest.raises(ValueError, match="vertex"):
        interpolate(lambda x, t: np.where(x[..., 0] == 0.5, np.inf, 1.0), 0.0, space)


def test_eval_in_cell():
    mesh = build_structured_mesh(2, 3)
    space = FunctionSpace(mesh)
    const = FemFunction(space, np.full(space.n_dofs, 4.0))
    val, grad = eval_in_cell(const, 7, [0.2, 0.5, 0.3])
    assert val == pytest.approx(4.0)
    assert np.abs(grad).max() < 1e-14

    linear = FemFunction(space, mesh.vertices[:, 0].copy())
    for cell in range(mesh.n_cells):
        val, grad = eval_in_cell(linear, cell, [1 / 3, 1 / 3, 1 / 3])
        assert np.allclose(grad, [1.0, 0.0], atol=1e-13)

    hat = FemFunction(space, np.zeros(space.n_dofs))
    hat.coeffs[mesh.cells[0][1]] = 1.0
    val, _ = eval_in_cell(hat, 0, [0.0, 1.0, 0.0])
    assert val == pytest.approx(1.0)


@pytest.mark.parametrize("dim", [2, 3])
def test_affine_reproduction(dim):
    mesh = build_structured_mesh(dim, 3)
    space = FunctionSpace(mesh)
    coeff = np.arange(1, dim + 1, dtype=float)
    f = interpolate(lambda x, t: x @ coeff + 0.5, 0.0, space)
    for cell in (0, mesh.n_cells // 2, mesh.n_cells - 1):
        point = np.full(dim + 1, 1.0 / (dim + 1))
        val, grad = eval_in_cell(f, cell, point)
        centroid = mesh.vertices[mesh.cells[cell]].mean(axis=0)
        assert val == pytest.approx(centroid @ coeff + 0.5, rel=1e-13)
        assert np.allclose(grad, coeff, atol=1e-12)


def test_dirichlet_bookkeeping():
    mesh = build_structured_mesh(2, 3)
    space = FunctionSpace(mesh, DIRICHLET)
    assert set(space.dirichlet_dofs) == set(mesh.boundary_vertices)
    assert np.all(np.diff(space.dirichlet_dofs) > 0)
    neumann = FunctionSpace(mesh, NEUMANN)
    assert neumann.dirichlet_dofs.size == 0
    free = space.free_dofs()
    assert len(free) + len(space.dirichlet_dofs) == space.n_dofs

    u = FemFunction(space, np.random.default_rng(1).standard_normal(space.n_dofs))
    apply_dirichlet(u, 0.0)
    assert not u.coeffs[space.dirichlet_dofs].any()


def test_femfunction_length_check():
    mesh = build_structured_mesh(2, 2)
    space = FunctionSpace(mesh)
    with pytest.raises(ValueError):
        FemFunction(space, np.zeros(3))
