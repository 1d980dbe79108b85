"""Local Crouzeix-Raviart-type virtual element used for pressure recovery.

Local dofs on a cell with N edges are the edge averages h_e^-1 int_e v,
interleaved as [m_0x, m_0y, m_1x, m_1y, ...]; globally edge e owns dofs
2e and 2e+1.  Averages of a vector field do not depend on the edge
orientation, so no sign bookkeeping is needed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import CellGeometry, PolygonalMesh
from .morley import MorleyLocalOps, grad_projection
from .quadrature import ScaledMonomialBasis


@dataclass
class CRLocalOps:
    geom: CellGeometry
    proj_grad: np.ndarray    # (6, 2N)
    proj_const: np.ndarray   # (2, 2N)
    div: np.ndarray          # (2N,)  divergence value (constant on the cell)
    grad_gram: np.ndarray    # (6, 6) H1 seminorm Gram of P1^2
    stiffness: np.ndarray    # (2N, 2N)
    b_row: np.ndarray        # (2N,)  int_E div v

    @property
    def n_dofs(self) -> int:
        return self.proj_grad.shape[1]


def _p1_grad_gram(geom: CellGeometry) -> np.ndarray:
    g = np.zeros((3, 3))
    g[1, 1] = g[2, 2] = geom.area / geom.diameter**2
    G = np.zeros((6, 6))
    G[:3, :3] = G[3:, 3:] = g
    return G


def cr_local_ops(geom: CellGeometry) -> CRLocalOps:
    N = geom.n_vertices
    nd = 2 * N
    h_e = geom.lengths
    E = np.zeros((N, 2, nd))
    for i in range(N):
        E[i, 0, 2 * i] = E[i, 1, 2 * i + 1] = h_e[i]
    proj_grad = grad_projection(geom, E)

    div = np.zeros(nd)
    div[0::2] = h_e * geom.normals[:, 0]
    div[1::2] = h_e * geom.normals[:, 1]
    b_row = div.copy()
    div /= geom.area

    # int_E v_c = sum_e int_e (x_c - xbar_c) v.n with v.n linear on e:
    # mean m_e.n_e, slope that of (Pi^grad v).n_e along the edge
    b1 = ScaledMonomialBasis.of(geom, 1)
    start = b1.values(geom.vertices)
    end = np.roll(start, -1, axis=0)
    slope = np.zeros((N, nd))
    for c in range(2):
        slope += geom.normals[:, c:c + 1] * ((end - start) @ proj_grad[3 * c:3 * c + 3])
    slope /= h_e[:, None]
    mean_n = np.zeros((N, nd))
    for i in range(N):
        mean_n[i, 2 * i:2 * i + 2] = geom.normals[i]
    mids = 0.5 * (geom.vertices + np.roll(geom.vertices, -1, axis=0))
    proj_const = np.zeros((2, nd))
    for c in range(2):
        w_mean = h_e * (mids[:, c] - geom.centroid[c])
        w_slope = geom.tangents[:, c] * h_e**3 / 12.0
        proj_const[c] = w_mean @ mean_n + w_slope @ slope
    proj_const /= geom.area

    D = np.zeros((nd, 6))
    mvals = b1.values(mids)
    for i in range(N):
        D[2 * i, :3] = mvals[i]
        D[2 * i + 1, 3:] = mvals[i]
    G = _p1_grad_gram(geom)
    R = np.eye(nd) - D @ proj_grad
    stiffness = proj_grad.T @ G @ proj_grad + R.T @ R
    stiffness = 0.5 * (stiffness + stiffness.T)
    return CRLocalOps(geom, proj_grad, proj_const, div, G, stiffness, b_row)


def cr_proj_grad(geom: CellGeometry, cr_dofs) -> np.ndarray:
    return cr_local_ops(geom).proj_grad @ np.ravel(cr_dofs)


def cr_divergence(geom: CellGeometry, cr_dofs) -> float:
    return float(cr_local_ops(geom).div @ np.ravel(cr_dofs))


def cr_proj_const(geom: CellGeometry, cr_dofs) -> np.ndarray:
    return cr_local_ops(geom).proj_const @ np.ravel(cr_dofs)


def cr_local_stokes(geom: CellGeometry):
    op = cr_local_ops(geom)
    return op.stiffness, op.b_row


class CRSpace:
    """Global CR-type space: two dofs per edge, boundary edges flagged."""

    def __init__(self, mesh: PolygonalMesh):
        self.mesh = mesh
        self.n_dofs = 2 * mesh.n_edges
        self.ops = [cr_local_ops(mesh.geometry(k)) for k in range(mesh.n_cells)]
        self.cell_dofs = []
        for k in range(mesh.n_cells):
            e = mesh.cell_edges[k]
            d = np.empty(2 * len(e), dtype=np.int64)
            d[0::2], d[1::2] = 2 * e, 2 * e + 1
            self.cell_dofs.append(d)
        bnd = np.flatnonzero(mesh.edge_boundary)
        self.boundary_dofs = np.sort(np.concatenate([2 * bnd, 2 * bnd + 1]))
        free = np.ones(self.n_dofs, dtype=bool)
        free[self.boundary_dofs] = False
        self.free_dofs = np.flatnonzero(free)
        nds = np.array([len(d) for d in self.cell_dofs], dtype=np.int64)
        self.dof_ptr = np.concatenate([[0], np.cumsum(nds)]).astype(np.int64)
        self.mat_ptr = np.concatenate([[0], np.cumsum(nds**2)]).astype(np.int64)
        self.flat_dofs = np.concatenate(self.cell_dofs).astype(np.int64)
        self.flat_signs = np.ones(len(self.flat_dofs))
        self.flat_stiffness = np.concatenate([op.stiffness.ravel() for op in self.ops])

    def local(self, k: int, vec) -> np.ndarray:
        return np.ravel(vec)[self.cell_dofs[k]]

    def divergence(self, vec) -> np.ndarray:
        v = np.ravel(vec)
        return np.array([op.div @ v[d] for op, d in zip(self.ops, self.cell_dofs)])


def pressure_load(cr_op: CRLocalOps, morley_op: MorleyLocalOps, psi_local: np.ndarray,
                  f_integral: np.ndarray, nu: float = 1.0, pressure_nu: bool = True) -> np.ndarray:
    """Local CR load for the pressure problem.

    ``f_integral`` is int_E f (2-vector); ``psi_local`` the Morley dofs of
    psi_h on the cell (outward convention).  Returns, per CR test dof,
    nu a^E(Pi^grad curl psi, Pi^grad v) + ((grad u) u - f, Pi^0 v)_E with
    u = Pi^1 curl psi.
    """
    geom = cr_op.geom
    visc = nu if pressure_nu else 1.0
    wcoef = morley_op.curl_grad @ psi_local
    out = visc * (cr_op.proj_grad.T @ (cr_op.grad_gram @ wcoef))
    u = morley_op.curl_l2 @ psi_local
    h = geom.diameter
    grad_u = np.array([[u[1], u[2]], [u[4], u[5]]]) / h
    conv = geom.area * grad_u @ np.array([u[0], u[3]])
    out += cr_op.proj_const.T @ (conv - f_integral)
    return out
