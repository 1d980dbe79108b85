import numpy as np
import pytest
import scipy.sparse as sp

from morley_ns import _kernels_py, kernels
from morley_ns.assembly import (apply_trilinear, assemble_A, assemble_jacobian, assemble_load,
                                assemble_pressure_saddle, assemble_trilinear_jacobian,
                                build_boundary_data, eliminate, residual)
from morley_ns.crouzeix_raviart import CRSpace
from morley_ns.exact import kovasznay
from morley_ns.mesh import (PolygonalMesh, generate_square_mesh, generate_trapezoid_mesh,
                            generate_triangle_mesh, generate_voronoi_mesh)
from morley_ns.morley import MorleySpace
from morley_ns.quadrature import edge_rule, polygon_rule
from morley_ns.solver import linear_solve

from test_morley import quad_poly

SPACES = {
    "square": MorleySpace(generate_square_mesh(4)),
    "tri": MorleySpace(generate_triangle_mesh(4)),
    "trap": MorleySpace(generate_trapezoid_mesh(4)),
    "cvt": MorleySpace(generate_voronoi_mesh(16, lloyd_iters=10, rng_seed=1)),
}
FAMILIES = list(SPACES)


@pytest.mark.parametrize("fam", FAMILIES)
def test_A_kernel(fam, rng):
    V = SPACES[fam]
    A = assemble_A(V).toarray()
    ev = np.linalg.eigvalsh(0.5 * (A + A.T))
    assert np.sum(np.abs(ev) < 1e-9 * ev.max()) == 3
    f, g, _ = quad_poly(np.r_[rng.standard_normal(3), 0, 0, 0])
    assert np.abs(A @ V.interpolate(f, g)).max() < 1e-9 * ev.max()


def test_one_cell_global_equals_local():
    m = PolygonalMesh([[0, 0], [1, 0], [1.3, 0.8], [0.4, 1.2], [-0.1, 0.6]], [[0, 1, 2, 3, 4]])
    V = MorleySpace(m)
    S = np.diag(V.cell_signs[0])
    P = np.zeros((V.n_dofs, 10))
    P[V.cell_dofs[0], np.arange(10)] = 1
    assert np.allclose(assemble_A(V).toarray(), P @ S @ V.ops[0].stiffness @ S @ P.T)


@pytest.mark.parametrize("fam", FAMILIES)
def test_A_consistency(fam, rng):
    V = SPACES[fam]
    f, g, H = quad_poly(rng.standard_normal(6))
    chi = V.interpolate(f, g)
    phi = rng.standard_normal(V.n_dofs)
    ref = 0.0
    for k, op in enumerate(V.ops):
        q = polygon_rule(op.geom, 2)
        ref += np.einsum("q,ij,qaij,a->", q.weights, H, op.basis.hessians(q.points), op.proj_D @ V.local(k, phi))
    assert chi @ assemble_A(V) @ phi == pytest.approx(ref, rel=1e-10)
    assert assemble_A(V, nu=0.3).toarray() == pytest.approx(0.3 * assemble_A(V).toarray())


@pytest.mark.parametrize("fam", FAMILIES)
def test_B_skew(fam, rng):
    V = SPACES[fam]
    for _ in range(5):
        z, p, q = rng.standard_normal((3, V.n_dofs))
        r = apply_trilinear(V, z, p)
        scale = np.linalg.norm(r) * np.linalg.norm(p)
        assert abs(r @ p) <= 1e-12 * scale
        assert r @ q == pytest.approx(-(apply_trilinear(V, z, q) @ p), abs=1e-12 * scale)


def test_B_vanishes_for_affine_zeta(rng):
    V = SPACES["cvt"]
    f, g, _ = quad_poly(np.r_[rng.standard_normal(3), 0, 0, 0])
    assert np.abs(apply_trilinear(V, V.interpolate(f, g), rng.standard_normal(V.n_dofs))).max() < 1e-10


def test_B_against_cellwise_formula(rng):
    """B_h(z; p, q) = sum_E (Pi0 Lap z) (Pi1 curl p, Pi1 grad q)_E with an explicit P1 Gram."""
    V = SPACES["trap"]
    z, p, q = rng.standard_normal((3, V.n_dofs))
    ref = 0.0
    for k, op in enumerate(V.ops):
        quad = polygon_rule(op.geom, 2)
        m = op.basis.values(quad.points)[:, :3]
        cu, gq = op.curl_l2 @ V.local(k, p), op.grad_l2 @ V.local(k, q)
        u = np.column_stack([m @ cu[:3], m @ cu[3:]])
        w = np.column_stack([m @ gq[:3], m @ gq[3:]])
        ref += (op.lap @ V.local(k, z)) * (quad.weights @ (u * w).sum(1))
    assert apply_trilinear(V, z, p) @ q == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("fam", FAMILIES)
def test_jacobian_fd(fam, rng):
    V = SPACES[fam]
    A = assemble_A(V)
    nu = 0.7
    psi, d = rng.standard_normal((2, V.n_dofs))
    F = np.zeros(V.n_dofs)
    J = assemble_jacobian(V, psi, nu, A)
    eps = 1e-7
    fd = (residual(V, psi + eps * d, nu, F, A) - residual(V, psi - eps * d, nu, F, A)) / (2 * eps)
    assert np.linalg.norm(fd - J @ d) <= 1e-6 * np.linalg.norm(J @ d)


def test_jacobian_zero_and_asymmetry(rng):
    V = SPACES["tri"]
    A = assemble_A(V)
    assert np.allclose(assemble_jacobian(V, np.zeros(V.n_dofs), 0.2, A).toarray(), 0.2 * A.toarray())
    J = assemble_trilinear_jacobian(V, rng.standard_normal(V.n_dofs)).toarray()
    assert np.abs(J - J.T).max() > 1e-3 * np.abs(J).max()


def test_backends_agree(rng):
    V = SPACES["cvt"]
    args = (V.dof_ptr, V.flat_dofs, V.flat_signs, V.mat_ptr)
    z, p = rng.standard_normal((2, V.n_dofs))
    for name, extra in [("local_triplets", (V.flat_stiffness,)),
                        ("trilinear_residual", (V.flat_trilinear, V.flat_lap, z, p, V.n_dofs)),
                        ("trilinear_jacobian", (V.flat_trilinear, V.flat_lap, p))]:
        a = getattr(kernels, name)(*args, *extra)
        b = getattr(kernels, name)(*args, *extra, impl=_kernels_py)
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            assert np.allclose(x, y, rtol=1e-13, atol=1e-13)


def test_large_cell_falls_back(rng):
    """Cells beyond the compiled buffer size still assemble (numpy path)."""
    t = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    m = PolygonalMesh(np.column_stack([np.cos(t), np.sin(t)]), [list(range(40))])
    V = MorleySpace(m)
    psi = rng.standard_normal(V.n_dofs)
    a = assemble_trilinear_jacobian(V, psi).toarray()
    args = (V.dof_ptr, V.flat_dofs, V.flat_signs, V.mat_ptr, V.flat_trilinear, V.flat_lap, psi)
    b = _kernels_py.trilinear_jacobian(*[np.asarray(x) for x in args])
    S = np.diag(V.cell_signs[0])
    assert np.allclose(a[np.ix_(V.cell_dofs[0], V.cell_dofs[0])], S @ b.reshape(80, 80) @ S)


def test_load_variants(rng):
    V = SPACES["trap"]
    assert not assemble_load(V).any()
    assert not assemble_load(V, lambda p: np.zeros_like(p)).any()
    # gradient force: rot f = 0
    assert not assemble_load(V, variant="rotational", rot_f=lambda p: np.zeros(len(p))).any()
    with pytest.raises(ValueError):
        assemble_load(V, variant="rotational")
    with pytest.raises(ValueError):
        assemble_load(V, variant="other")
    c = np.array([0.3, -1.2])
    F = assemble_load(V, lambda p: np.tile(c, (len(p), 1)))
    phi = rng.standard_normal(V.n_dofs)
    ref = 0.0
    for k, op in enumerate(V.ops):
        coeffs = op.curl_l2 @ V.local(k, phi)
        # int_E of the P1 field: only the constant monomial survives against the centroid
        ref += op.geom.area * (c[0] * coeffs[0] + c[1] * coeffs[3])
    assert F @ phi == pytest.approx(ref, rel=1e-12)


def test_boundary_data_cases():
    V = MorleySpace(generate_square_mesh(4))
    assert not build_boundary_data(V).values.any()
    lid = build_boundary_data(V, "lid")
    nv = V.mesh.n_vertices
    vals = lid.lift(V.n_dofs)
    assert not vals[:nv].any()
    top = np.flatnonzero(np.isclose(V.mesh.vertices[V.mesh.edges].mean(1)[:, 1], 1.0))
    assert np.allclose(vals[nv + top], 0.25)
    assert np.count_nonzero(vals) == 4
    with pytest.raises(ValueError):
        build_boundary_data(MorleySpace(generate_triangle_mesh(2, "l-shaped")), "lid")
    with pytest.raises(ValueError):
        build_boundary_data(V, "exact")


def test_boundary_data_exact_kovasznay():
    V = MorleySpace(generate_trapezoid_mesh(4))
    ex = kovasznay(1.0)
    bd = build_boundary_data(V, "exact", ex.psi, ex.grad_psi)
    m = V.mesh
    nv = m.n_vertices
    vdofs = bd.dofs[bd.dofs < nv]
    assert np.allclose(bd.lift(V.n_dofs)[vdofs], ex.psi(m.vertices[vdofs]))
    for dof in bd.dofs[bd.dofs >= nv]:
        e = dof - nv
        a, b = m.vertices[m.edges[e]]
        pts, w = edge_rule(a, b, 15)   # 8-point Gauss
        assert bd.lift(V.n_dofs)[dof] == pytest.approx(w @ (ex.grad_psi(pts) @ m.edge_normal[e]), abs=1e-11)


def test_eliminate_moves_data_to_rhs(rng):
    V = SPACES["square"]
    A = assemble_A(V)
    bd = build_boundary_data(V, "lid")
    S = eliminate(A, np.zeros(V.n_dofs), bd)
    x = bd.lift(V.n_dofs)
    x[V.free_dofs] = linear_solve(S.matrix, S.rhs)
    assert np.abs((A @ x)[V.free_dofs]).max() < 1e-10


def test_global_quadratic_patch():
    V = SPACES["cvt"]
    f, g, _ = quad_poly([0.3, -0.2, 0.5, 1.0, -0.7, 0.4])
    chi = V.interpolate(f, g)
    A = assemble_A(V)
    bd = build_boundary_data(V, "exact", f, g)
    S = eliminate(A, A @ chi, bd)
    x = bd.lift(V.n_dofs)
    x[V.free_dofs] = linear_solve(S.matrix, S.rhs)
    assert np.allclose(x, chi, atol=1e-10)


def test_pressure_saddle_zero_data():
    V = SPACES["trap"]
    cr = CRSpace(V.mesh)
    sys = assemble_pressure_saddle(cr, V, np.zeros(V.n_dofs))
    assert not sys.rhs.any()
    x = linear_solve(sys.matrix, sys.rhs)
    assert not x.any()
    assert sys.matrix.shape[0] == len(cr.free_dofs) + V.mesh.n_cells + 1
    K = sys.matrix
    assert abs(K - K.T).max() < 1e-13


def _gradient_force_error(mesh):
    V = MorleySpace(mesh)
    cr = CRSpace(mesh)
    g = lambda p: np.sin(p[:, 0]) + p[:, 1] ** 2
    grad_g = lambda p: np.column_stack([np.cos(p[:, 0]), 2 * p[:, 1]])
    sys = assemble_pressure_saddle(cr, V, np.zeros(V.n_dofs), grad_g, nu=0.3)
    x = linear_solve(sys.matrix, sys.rhs)
    nf = len(cr.free_dofs)
    p = x[nf:nf + mesh.n_cells]
    assert abs(mesh.cell_area @ p) < 1e-12
    avg = []
    for k in range(mesh.n_cells):
        q = polygon_rule(mesh.geometry(k), 6)
        avg.append(q.integrate(g(q.points)) / mesh.cell_area[k])
    avg = np.array(avg) - mesh.cell_area @ np.array(avg)
    return np.sqrt(mesh.cell_area @ (p - avg) ** 2)


@pytest.mark.parametrize("gen", [generate_square_mesh, generate_triangle_mesh, generate_trapezoid_mesh])
def test_pressure_of_gradient_force(gen):
    """f = grad g with psi_h = 0: p_h approaches the cell averages of g (zero mean) at O(h)."""
    e1, e2 = _gradient_force_error(gen(8)), _gradient_force_error(gen(16))
    assert e2 < 0.1
    assert np.log2(e1 / e2) > 0.8
