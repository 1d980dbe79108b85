import numpy as np
import pytest

from morley_ns.crouzeix_raviart import (CRSpace, cr_divergence, cr_local_ops, cr_local_stokes,
                                        cr_proj_const, cr_proj_grad, pressure_load)
from morley_ns.mesh import (CellGeometry, generate_square_mesh, generate_trapezoid_mesh,
                            generate_triangle_mesh, generate_voronoi_mesh)
from morley_ns.morley import build_local_ops, stokes_complex_map
from morley_ns.quadrature import ScaledMonomialBasis, edge_rule, polygon_rule

UNIT = CellGeometry.from_vertices([[0, 0], [1, 0], [1, 1], [0, 1]])
PENTAGON = CellGeometry.from_vertices([[0, 0], [1.2, 0.1], [1.5, 0.9], [0.6, 1.4], [-0.2, 0.8]])


def edge_averages(geom, v):
    """Interleaved CR dofs (edge averages) of a vector field v(points) -> (n, 2)."""
    out = []
    for i in range(geom.n_vertices):
        a, b = geom.vertices[i], geom.vertices[(i + 1) % geom.n_vertices]
        pts, w = edge_rule(a, b, 6)
        out.append(w @ v(pts) / geom.lengths[i])
    return np.concatenate(out)


def p1_eval(geom, coeffs, pts):
    m = ScaledMonomialBasis.of(geom, 1).values(pts)
    return np.column_stack([m @ coeffs[:3], m @ coeffs[3:]])


def affine_field(rng):
    A, b = rng.standard_normal((2, 2)), rng.standard_normal(2)
    return A, b, (lambda p: p @ A.T + b)


@pytest.mark.parametrize("geom", [UNIT, PENTAGON])
def test_proj_grad_reproduces_p1(geom, rng):
    A, b, v = affine_field(rng)
    pts = polygon_rule(geom, 2).points
    assert np.allclose(p1_eval(geom, cr_proj_grad(geom, edge_averages(geom, v)), pts), v(pts), atol=1e-12)
    c = rng.standard_normal(2)
    coeffs = cr_proj_grad(geom, np.tile(c, geom.n_vertices))
    assert np.allclose(coeffs[[0, 3]], c) and np.allclose(coeffs[[1, 2, 4, 5]], 0, atol=1e-13)


def test_proj_grad_orthogonality(rng):
    """Pi^grad v - v is H1-orthogonal to P1^2: int grad(q) : grad(Pi v) = sum_e int_e (grad q n) . v."""
    op = cr_local_ops(PENTAGON)
    dofs = rng.standard_normal(op.n_dofs)
    coeffs = op.proj_grad @ dofs
    h = PENTAGON.diameter
    for c in range(2):
        for a in (1, 2):
            q = np.zeros(6)
            q[3 * c + a] = 1.0
            lhs = q @ op.grad_gram @ coeffs
            grad_q = np.zeros((2, 2))
            grad_q[c, a - 1] = 1.0 / h
            rhs = sum(PENTAGON.lengths[i] * (grad_q @ PENTAGON.normals[i]) @ dofs[2 * i:2 * i + 2]
                      for i in range(5))
            assert lhs == pytest.approx(rhs, abs=1e-12)
    # boundary mean condition
    bnd = sum(PENTAGON.lengths[i] * (p1_eval(PENTAGON, coeffs, (PENTAGON.vertices[[i]] + PENTAGON.vertices[[(i + 1) % 5]]) / 2)[0]
                                     - dofs[2 * i:2 * i + 2]) for i in range(5))
    assert np.allclose(bnd, 0, atol=1e-12)


@pytest.mark.parametrize("geom", [UNIT, PENTAGON])
def test_divergence(geom, rng):
    assert cr_divergence(geom, edge_averages(geom, lambda p: np.column_stack([p[:, 0], 0 * p[:, 0]]))) \
        == pytest.approx(1.0)
    assert cr_divergence(geom, np.tile(rng.standard_normal(2), geom.n_vertices)) == pytest.approx(0, abs=1e-12)
    A, _, v = affine_field(rng)
    assert cr_divergence(geom, edge_averages(geom, v)) == pytest.approx(np.trace(A), abs=1e-12)


@pytest.mark.parametrize("geom", [UNIT, PENTAGON])
def test_proj_const(geom, rng):
    c = rng.standard_normal(2)
    assert np.allclose(cr_proj_const(geom, np.tile(c, geom.n_vertices)), c)
    assert np.allclose(cr_proj_const(geom, edge_averages(geom, lambda p: p)), geom.centroid, atol=1e-12)
    A, b, v = affine_field(rng)
    q = polygon_rule(geom, 2)
    mean = q.weights @ v(q.points) / geom.area
    assert np.allclose(cr_proj_const(geom, edge_averages(geom, v)), mean, atol=1e-12)


def test_proj_const_random_dofs_oracle(rng):
    """int_E v_c = int_dE (x_c - xbar_c) v.n with v.n linear on each edge (mean + Pi^grad slope)."""
    op = cr_local_ops(PENTAGON)
    dofs = rng.standard_normal(op.n_dofs)
    coeffs = op.proj_grad @ dofs
    total = np.zeros(2)
    for i in range(5):
        a, b = PENTAGON.vertices[i], PENTAGON.vertices[(i + 1) % 5]
        pts, w = edge_rule(a, b, 4)
        n = PENTAGON.normals[i]
        mid = 0.5 * (a + b)
        slope_field = p1_eval(PENTAGON, coeffs, pts) @ n
        vn = dofs[2 * i:2 * i + 2] @ n + slope_field - p1_eval(PENTAGON, coeffs, mid[None])[0] @ n
        total += (w * vn) @ (pts - PENTAGON.centroid)
    assert np.allclose(op.proj_const @ dofs, total / PENTAGON.area, atol=1e-11)


@pytest.mark.parametrize("geom", [UNIT, PENTAGON])
def test_local_stokes(geom, rng):
    a, b = cr_local_stokes(geom)
    assert np.allclose(a @ np.tile(rng.standard_normal(2), geom.n_vertices), 0, atol=1e-12)
    # consistency a_h(chi, v) = a(chi, Pi^grad v)
    op = cr_local_ops(geom)
    _, _, chi = affine_field(rng)
    chi_dofs = edge_averages(geom, chi)
    v = rng.standard_normal(op.n_dofs)
    assert chi_dofs @ a @ v == pytest.approx((op.proj_grad @ chi_dofs) @ op.grad_gram @ (op.proj_grad @ v),
                                             rel=1e-11, abs=1e-12)
    assert np.allclose(b, geom.area * op.div)


def test_local_stokes_kernel_unit_square():
    ev = np.linalg.eigvalsh(cr_local_stokes(UNIT)[0])
    assert np.sum(np.abs(ev) < 1e-10 * ev.max()) == 2


MESHES = [generate_square_mesh(4), generate_triangle_mesh(4), generate_trapezoid_mesh(4),
          generate_voronoi_mesh(16, lloyd_iters=10, rng_seed=2)]


@pytest.mark.parametrize("mesh", MESHES)
def test_stokes_complex(mesh, rng):
    psi = rng.standard_normal(mesh.n_vertices + mesh.n_edges)
    w = stokes_complex_map(mesh, psi)
    assert np.abs(CRSpace(mesh).divergence(w)).max() <= 1e-12 * max(1, np.abs(w).max())


def test_stokes_complex_affine():
    mesh = generate_voronoi_mesh(9, lloyd_iters=5)
    V = mesh.vertices
    psi = np.r_[2 + 3 * V[:, 0] - V[:, 1], mesh.edge_length * (mesh.edge_normal @ [3.0, -1.0])]
    assert np.allclose(stokes_complex_map(mesh, psi), [-1.0, -3.0])


def test_pressure_load_trivial(rng):
    cr = cr_local_ops(PENTAGON)
    mop = build_local_ops(PENTAGON)
    assert not pressure_load(cr, mop, np.zeros(10), np.zeros(2)).any()
    fint = np.array([1.0, 0.0]) * PENTAGON.area
    assert np.allclose(pressure_load(cr, mop, np.zeros(10), fint), -PENTAGON.area * cr.proj_const[0])


def test_pressure_load_viscosity_switch(rng):
    cr = cr_local_ops(PENTAGON)
    mop = build_local_ops(PENTAGON)
    psi = rng.standard_normal(10)
    with_nu = pressure_load(cr, mop, psi, np.zeros(2), nu=0.1, pressure_nu=True)
    without = pressure_load(cr, mop, psi, np.zeros(2), nu=0.1, pressure_nu=False)
    visc = cr.proj_grad.T @ cr.grad_gram @ (mop.curl_grad @ psi)
    assert np.allclose(without - with_nu, 0.9 * visc)


def test_space_layout():
    mesh = generate_square_mesh(2)
    cr = CRSpace(mesh)
    assert cr.n_dofs == 24
    assert len(cr.boundary_dofs) == 16 and len(cr.free_dofs) == 8
