"""Global sparse operators of the stream-function scheme and the pressure system."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .crouzeix_raviart import CRSpace, pressure_load
from .morley import MorleySpace
from .quadrature import MeshQuadrature

LOAD_VARIANTS = ("standard", "rotational")


@dataclass
class BoundaryData:
    """Prescribed values of the boundary DOFs (vertex values and edge moments)."""

    dofs: np.ndarray
    values: np.ndarray

    def lift(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.dofs] = self.values
        return out


@dataclass
class SparseSystem:
    """Matrix with right side and the constrained DOFs it was reduced from."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray
    constrained_values: np.ndarray

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def _scatter(space, mats: np.ndarray, n: int | None = None) -> sp.csr_matrix:
    n = space.n_dofs if n is None else n
    r, c, v = kernels.local_triplets(space.dof_ptr, space.flat_dofs, space.flat_signs,
                                     space.mat_ptr, mats)
    return sp.csr_matrix((v, (r, c)), shape=(n, n))


def assemble_A(space: MorleySpace, nu: float = 1.0) -> sp.csr_matrix:
    """nu * A_h: scatter of the local stiffness matrices with edge-sign conjugation."""
    A = _scatter(space, space.flat_stiffness)
    return (nu * A).tocsr() if nu != 1.0 else A


def apply_trilinear(space: MorleySpace, zeta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Vector r with r . psi = B_h(zeta; phi, psi)."""
    return kernels.trilinear_residual(space.dof_ptr, space.flat_dofs, space.flat_signs,
                                      space.mat_ptr, space.flat_trilinear, space.flat_lap,
                                      zeta, phi, space.n_dofs)


def assemble_trilinear_jacobian(space: MorleySpace, psi: np.ndarray) -> sp.csr_matrix:
    """Derivative of psi -> B_h(psi; psi, .) at psi."""
    vals = kernels.trilinear_jacobian(space.dof_ptr, space.flat_dofs, space.flat_signs,
                                      space.mat_ptr, space.flat_trilinear, space.flat_lap, psi)
    return _scatter(space, vals)


def assemble_jacobian(space: MorleySpace, psi: np.ndarray, nu: float,
                      A: sp.csr_matrix | None = None) -> sp.csr_matrix:
    A = assemble_A(space) if A is None else A
    return (nu * A + assemble_trilinear_jacobian(space, psi)).tocsr()


def residual(space: MorleySpace, psi: np.ndarray, nu: float, load: np.ndarray,
             A: sp.csr_matrix | None = None) -> np.ndarray:
    """nu A_h psi + B_h(psi; psi, .) - F_h on all DOFs."""
    A = assemble_A(space) if A is None else A
    return nu * (A @ psi) + apply_trilinear(space, psi, psi) - load


def assemble_load(space: MorleySpace, f=None, variant: str = "standard", rot_f=None,
                  degree: int = 6, quad: MeshQuadrature | None = None) -> np.ndarray:
    """Discrete load F_h.

    standard:   sum_E (f, Pi^1 curl phi)_E, with f(points) -> (npts, 2)
    rotational: sum_E (rot f, Pi^2 phi)_E,  with rot_f(points) -> (npts,)
    """
    if variant not in LOAD_VARIANTS:
        raise ValueError(f"load variant must be one of {LOAD_VARIANTS}")
    mesh = space.mesh
    out = np.zeros(space.n_dofs)
    if variant == "standard" and f is None:
        return out
    if variant == "rotational" and rot_f is None:
        raise ValueError("rotational load needs rot f")
    quad = MeshQuadrature.build(mesh, degree) if quad is None else quad
    if variant == "standard":
        m = quad.monomials(mesh, 1)
        fv = np.asarray(f(quad.points), dtype=float).reshape(-1, 2)
        g = quad.cell_sum(np.concatenate([fv[:, :1] * m, fv[:, 1:] * m], axis=1))   # (nc, 6)
        for k, op in enumerate(space.ops):
            np.add.at(out, space.cell_dofs[k], space.cell_signs[k] * (op.curl_l2.T @ g[k]))
    else:
        m = quad.monomials(mesh, 2)
        rv = np.asarray(rot_f(quad.points), dtype=float).reshape(-1)
        g = quad.cell_sum(rv[:, None] * m)
        for k, op in enumerate(space.ops):
            np.add.at(out, space.cell_dofs[k], space.cell_signs[k] * (op.proj_D.T @ g[k]))
    return out


def build_boundary_data(space: MorleySpace, case: str = "homogeneous", psi=None,
                        grad_psi=None, degree: int = 15) -> BoundaryData:
    """Boundary DOF values for 'homogeneous', 'exact' (needs psi, grad_psi) or 'lid'."""
    # degree 15: 8-point Gauss rule on every edge for the exact normal-derivative moments
    mesh = space.mesh
    dofs = space.boundary_dofs
    nv = mesh.n_vertices
    if case == "homogeneous":
        return BoundaryData(dofs, np.zeros(len(dofs)))
    if case == "exact":
        if psi is None or grad_psi is None:
            raise ValueError("exact boundary data needs psi and grad_psi")
        full = space.interpolate(psi, grad_psi, degree)
        return BoundaryData(dofs, full[dofs])
    if case == "lid":
        lo, hi = mesh.vertices.min(0), mesh.vertices.max(0)
        if not (np.allclose(lo, 0) and np.allclose(hi, 1) and np.isclose(mesh.area, 1.0)):
            raise ValueError("lid boundary data requires the unit square")
        vals = np.zeros(len(dofs))
        edge = dofs[dofs >= nv] - nv
        mid = 0.5 * (mesh.vertices[mesh.edges[edge, 0]] + mesh.vertices[mesh.edges[edge, 1]])
        top = np.isclose(mid[:, 1], 1.0) & (mesh.edge_normal[edge, 1] > 0.5)
        vals[dofs >= nv] = np.where(top, mesh.edge_length[edge], 0.0)
        return BoundaryData(dofs, vals)
    raise ValueError(f"unknown boundary case {case!r}")


def eliminate(matrix: sp.spmatrix, rhs: np.ndarray, bd: BoundaryData) -> SparseSystem:
    """Reduce to the free DOFs, moving prescribed values to the right side."""
    n = matrix.shape[0]
    free = np.ones(n, dtype=bool)
    free[bd.dofs] = False
    fi = np.flatnonzero(free)
    M = sp.csr_matrix(matrix)
    g = bd.lift(n)
    Aff = M[fi][:, fi].tocsr()
    b = rhs[fi] - M[fi] @ g
    return SparseSystem(Aff, b, bd.dofs, bd.values)


# ------------------------------------------------------------------ pressure


def cell_force_integrals(mesh, f, degree: int = 6, quad: MeshQuadrature | None = None) -> np.ndarray:
    if f is None:
        return np.zeros((mesh.n_cells, 2))
    quad = MeshQuadrature.build(mesh, degree) if quad is None else quad
    return quad.cell_sum(np.asarray(f(quad.points), dtype=float).reshape(-1, 2))


def assemble_pressure_saddle(cr: CRSpace, space: MorleySpace, psi: np.ndarray, f=None,
                             nu: float = 1.0, pressure_nu: bool = True, degree: int = 6,
                             f_integrals: np.ndarray | None = None) -> SparseSystem:
    """Saddle system [[a_h, b^T, 0], [b, 0, m], [0, m^T, 0]] on interior CR DOFs.

    Unknowns are (w_h on interior CR DOFs, one pressure per cell, multiplier).
    """
    mesh = space.mesh
    nc = mesh.n_cells
    if f_integrals is None:
        f_integrals = cell_force_integrals(mesh, f, degree)
    a = _scatter(cr, cr.flat_stiffness)
    rows, cols, vals = [], [], []
    load = np.zeros(cr.n_dofs)
    for k, (op, mop) in enumerate(zip(cr.ops, space.ops)):
        d = cr.cell_dofs[k]
        rows.append(np.full(len(d), k))
        cols.append(d)
        vals.append(op.b_row)
        load[d] += pressure_load(op, mop, space.local(k, psi), f_integrals[k], nu, pressure_nu)
    B = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nc, cr.n_dofs))
    fr = cr.free_dofs
    a_ff = a[fr][:, fr]
    B_f = B[:, fr]
    m = sp.csr_matrix(np.asarray(mesh.cell_area).reshape(-1, 1))
    K = sp.bmat([[a_ff, B_f.T, None], [B_f, None, m], [None, m.T, None]], format="csr")
    rhs = np.concatenate([load[fr], np.zeros(nc + 1)])
    return SparseSystem(K, rhs, cr.boundary_dofs, np.zeros(len(cr.boundary_dofs)))
