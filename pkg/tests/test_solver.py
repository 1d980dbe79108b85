import numpy as np
import pytest
import scipy.sparse as sp

from morley_ns.assembly import assemble_A, assemble_load, build_boundary_data
from morley_ns.crouzeix_raviart import CRSpace
from morley_ns.exact import kovasznay, quadratic
from morley_ns.mesh import generate_square_mesh, generate_trapezoid_mesh, generate_triangle_mesh
from morley_ns.morley import MorleySpace
from morley_ns.solver import (NewtonConfig, NewtonDivergence, SolverError, linear_solve,
                              newton_solve, solve_pressure)


def test_linear_solve_identity(rng):
    b = rng.standard_normal(7)
    assert np.allclose(linear_solve(sp.identity(7), b), b)
    assert linear_solve(sp.csr_matrix((0, 0)), np.zeros(0)).size == 0


def test_linear_solve_singular():
    with pytest.raises(SolverError):
        linear_solve(sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])), np.array([1.0, 2.0]))


def test_newton_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(tol=0)
    with pytest.raises(ValueError):
        NewtonConfig(damping="sometimes")
    with pytest.raises(ValueError):
        NewtonConfig(criterion="other")


def test_zero_data_zero_solution():
    V = MorleySpace(generate_trapezoid_mesh(4))
    psi, rep = newton_solve(V, 1.0, np.zeros(V.n_dofs), build_boundary_data(V))
    assert rep.iterations == 1 and rep.converged
    assert not psi.any()


@pytest.mark.parametrize("nu", [1.0, 0.05])
@pytest.mark.parametrize("gen", [generate_triangle_mesh, generate_trapezoid_mesh])
def test_quadratic_stokes_patch(nu, gen):
    """Quadratic psi, p = 0: the Stokes force vanishes and nu A_h psi = 0 reproduces psi."""
    V = MorleySpace(gen(4))
    ex = quadratic(nu=nu)
    A = nu * assemble_A(V)
    bd = build_boundary_data(V, "exact", ex.psi, ex.grad_psi)
    psi = bd.lift(V.n_dofs)
    fr = V.free_dofs
    psi[fr] = linear_solve(A[fr][:, fr], -(A @ psi)[fr])
    assert np.allclose(psi, V.interpolate(ex.psi, ex.grad_psi), atol=1e-10)


def test_kovasznay_converges_quadratically():
    ex = kovasznay(1.0)
    V = MorleySpace(generate_square_mesh(8))
    F = assemble_load(V, ex.f)
    bd = build_boundary_data(V, "exact", ex.psi, ex.grad_psi)
    psi, rep = newton_solve(V, 1.0, F, bd, NewtonConfig(tol=1e-12))
    assert rep.converged and rep.iterations <= 4
    r = rep.residuals
    # quadratic convergence: each residual roughly squares (relative to the first step)
    assert r[-1] < 1e-10 and r[2] < 10 * r[1] ** 2 / r[0] + 1e-12


def test_newton_failure_reports_history():
    V = MorleySpace(generate_square_mesh(4))
    ex = kovasznay(1.0)
    bd = build_boundary_data(V, "exact", ex.psi, ex.grad_psi)
    with pytest.raises(NewtonDivergence) as info:
        newton_solve(V, 1.0, np.zeros(V.n_dofs), bd, NewtonConfig(tol=1e-30, max_iters=2))
    assert len(info.value.history) == 3


def test_increment_criterion_takes_at_least_as_long():
    ex = kovasznay(1.0)
    V = MorleySpace(generate_square_mesh(8))
    F = assemble_load(V, ex.f)
    bd = build_boundary_data(V, "exact", ex.psi, ex.grad_psi)
    _, a = newton_solve(V, 1.0, F, bd, NewtonConfig(criterion="residual"))
    _, b = newton_solve(V, 1.0, F, bd, NewtonConfig(criterion="increment"))
    assert b.iterations >= a.iterations


def test_pressure_zero_data():
    V = MorleySpace(generate_trapezoid_mesh(4))
    sol = solve_pressure(CRSpace(V.mesh), V, np.zeros(V.n_dofs))
    assert not sol.p.any() and not sol.w.any() and sol.multiplier == 0


def test_pressure_of_quadratic_stream_function():
    """psi quadratic, f from the exact data: p_h recovers p = 0 up to round-off on triangles."""
    ex = quadratic(nu=1.0)
    V = MorleySpace(generate_triangle_mesh(4))
    psi = V.interpolate(ex.psi, ex.grad_psi)
    sol = solve_pressure(CRSpace(V.mesh), V, psi, ex.f, nu=1.0, degree=4)
    assert np.abs(sol.p).max() < 1e-10
    assert np.abs(sol.w).max() < 1e-10
