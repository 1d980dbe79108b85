"""Local machinery of the lowest-order Morley-type nonconforming virtual element.

Local degrees of freedom on a cell with N vertices are ordered

    [phi(v_0), ..., phi(v_{N-1}), mu_0, ..., mu_{N-1}],   mu_i = int_{e_i} d phi / d n_E

with e_i the edge from v_i to v_{i+1} and n_E the outward normal of the cell.
All polynomial images are returned as coefficient matrices acting on this
vector, in the scaled monomial basis of ``quadrature.ScaledMonomialBasis``.
Vector-valued P1 images use the layout [x-part (1, xi, eta), y-part (1, xi, eta)].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import CellGeometry, PolygonalMesh
from .quadrature import ScaledMonomialBasis, edge_rule, mass_matrix, monomial_integrals

# constant Hessians of xi^2, xi*eta, eta^2 times h^2
_HESS = np.array([[[2.0, 0.0], [0.0, 0.0]],
                  [[0.0, 1.0], [1.0, 0.0]],
                  [[0.0, 0.0], [0.0, 2.0]]])
# constant gradients of xi, eta times h
_GRAD1 = np.eye(2)
# rotation taking grad phi to curl phi = (phi_y, -phi_x)
ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])

STAB_SCALINGS = ("paper", "homogenized")


def edge_endpoints(geom: CellGeometry, i: int):
    n = geom.n_vertices
    return geom.vertices[i], geom.vertices[(i + 1) % n]


def _p1_vector_basis_values(basis: ScaledMonomialBasis, pts):
    """(npts, 2, 6) values of the six P1^2 basis fields."""
    m = basis.values(pts)[:, :3]
    out = np.zeros((len(m), 2, 6))
    out[:, 0, :3] = m
    out[:, 1, 3:] = m
    return out


def grad_projection(geom: CellGeometry, edge_integrals: np.ndarray) -> np.ndarray:
    """H1 projection onto P1^2 of a vector field known through its edge integrals.

    ``edge_integrals`` has shape (N, 2, ndof): int_e v as a linear map of the
    dofs.  Solves (grad P v, grad chi)_E = sum_e int_e v . (grad chi) n_e and
    int_dE P v = int_dE v; returns the (6, ndof) coefficient matrix.
    """
    h, area = geom.diameter, geom.area
    ndof = edge_integrals.shape[2]
    L = np.zeros((6, 6))
    R = np.zeros((6, ndof))
    basis = ScaledMonomialBasis.of(geom, 1)
    mids = 0.5 * (geom.vertices + np.roll(geom.vertices, -1, axis=0))
    bnd = (geom.lengths[:, None] * basis.values(mids)).sum(0)  # int_dE m_a
    for c in range(2):
        # constant rows: boundary means
        L[3 * c, 3 * c:3 * c + 3] = bnd
        R[3 * c] = edge_integrals[:, c, :].sum(0)
        for a in (1, 2):
            ga = _GRAD1[a - 1] / h
            for b in (1, 2):
                L[3 * c + a, 3 * c + b] = area * ga @ (_GRAD1[b - 1] / h)
            R[3 * c + a] = (geom.normals @ ga) @ edge_integrals[:, c, :]
    return np.linalg.solve(L, R)


@dataclass
class MorleyLocalOps:
    """Projector matrices and local forms for one cell."""

    geom: CellGeometry
    basis: ScaledMonomialBasis
    proj_D: np.ndarray          # (6, 2N)  Pi^D, also Pi^2
    dof_matrix: np.ndarray      # (2N, 6)  dofs of the scaled monomials
    hess_gram: np.ndarray       # (6, 6)   A^E on scaled monomials
    curl_grad: np.ndarray       # (6, 2N)  Pi^grad curl
    lap: np.ndarray             # (2N,)    Pi^0 Laplacian
    curl_l2: np.ndarray         # (6, 2N)  Pi^1 curl
    grad_l2: np.ndarray         # (6, 2N)  Pi^1 grad
    mass1: np.ndarray           # (3, 3)   P1 Gram
    stiffness: np.ndarray       # (2N, 2N)
    trilinear: np.ndarray       # (2N, 2N) (Pi^1 grad)^T M (Pi^1 curl); test index first
    trace_start: np.ndarray = field(repr=False)   # (N, 2N) phi at edge start
    trace_diff: np.ndarray = field(repr=False)    # (N, 2N) phi(end) - phi(start)
    trace_slope: np.ndarray = field(repr=False)   # (N, 2N) slope of d_t phi along the edge

    @property
    def n_dofs(self) -> int:
        return self.proj_D.shape[1]

    def trace(self, i: int, s: np.ndarray) -> np.ndarray:
        """(len(s), 2N) map from dofs to phi on edge i at arclength s."""
        h = self.geom.lengths[i]
        s = np.asarray(s, dtype=float)[:, None]
        return (self.trace_start[i] + s * self.trace_diff[i] / h
                + 0.5 * (s**2 - h * s) * self.trace_slope[i])

    def trace_tangential(self, i: int, s: np.ndarray) -> np.ndarray:
        """(len(s), 2N) map from dofs to d_t phi on edge i at arclength s."""
        h = self.geom.lengths[i]
        s = np.asarray(s, dtype=float)[:, None]
        return self.trace_diff[i] / h + (s - 0.5 * h) * self.trace_slope[i]

    def local_dofs(self, f, grad_f, degree: int = 8) -> np.ndarray:
        """DOF vector (outward normals) of a smooth function on this cell."""
        return local_interpolant(self.geom, f, grad_f, degree)


def _proj_D(geom, basis, N):
    h = geom.diameter
    V = basis.values(geom.vertices)               # (N, 6)
    H = _HESS / h**2                              # Hessians of m_3..m_5
    G = np.zeros((6, 6))
    B = np.zeros((6, 2 * N))
    G[:3] = V[:, :3].T @ V
    B[:3, :N] = V[:, :3].T
    hess_gram = np.zeros((6, 6))
    hess_gram[3:, 3:] = geom.area * np.einsum("aij,bij->ab", H, H)
    G[3:] = hess_gram[3:]
    nn = np.einsum("ei,rij,ej->re", geom.normals, H, geom.normals)   # (3, N)
    tn = np.einsum("ei,rij,ej->re", geom.tangents, H, geom.normals)
    idx = np.arange(N)
    for r in range(3):
        B[3 + r, N:] = nn[r]
        np.add.at(B[3 + r], (idx + 1) % N, tn[r])
        np.add.at(B[3 + r], idx, -tn[r])
    return np.linalg.solve(G, B), hess_gram


def _dof_matrix(geom, basis, N):
    D = np.zeros((2 * N, basis.size))
    D[:N] = basis.values(geom.vertices)
    mids = 0.5 * (geom.vertices + np.roll(geom.vertices, -1, axis=0))
    grads = basis.gradients(mids)                 # (N, 6, 2), linear: midpoint exact
    D[N:] = geom.lengths[:, None] * np.einsum("eai,ei->ea", grads, geom.normals)
    return D


def build_local_ops(geom: CellGeometry, stab_scaling: str = "paper") -> MorleyLocalOps:
    if stab_scaling not in STAB_SCALINGS:
        raise ValueError(f"stab_scaling must be one of {STAB_SCALINGS}")
    N = geom.n_vertices
    nd = 2 * N
    basis = ScaledMonomialBasis.of(geom, 2)
    idx = np.arange(N)

    proj_D, hess_gram = _proj_D(geom, basis, N)
    D = _dof_matrix(geom, basis, N)

    # int_e curl phi = (phi(end) - phi(start)) n_e - mu_e t_e
    diff = np.zeros((N, nd))
    diff[idx, (idx + 1) % N] += 1.0
    diff[idx, idx] -= 1.0
    mu = np.zeros((N, nd))
    mu[idx, N + idx] = 1.0
    curl_int = (geom.normals[:, :, None] * diff[:, None, :]
                - geom.tangents[:, :, None] * mu[:, None, :])
    curl_grad = grad_projection(geom, curl_int)

    # edge traces: d_t phi is linear with mean diff/h and the slope of
    # (Pi^grad curl phi) . n along the edge
    b1 = ScaledMonomialBasis.of(geom, 1)
    start = b1.values(geom.vertices)
    end = np.roll(start, -1, axis=0)
    slope = np.zeros((N, nd))
    for c in range(2):
        dv = (end - start) @ curl_grad[3 * c:3 * c + 3]      # (N, nd)
        slope += geom.normals[:, c:c + 1] * dv
    slope /= geom.lengths[:, None]
    trace_start = np.zeros((N, nd))
    trace_start[idx, idx] = 1.0

    lap = np.zeros(nd)
    lap[N:] = 1.0 / geom.area

    mass2 = mass_matrix(geom, 2)
    mass1 = mass2[:3, :3]
    ints = monomial_integrals(geom, 2)
    mean_phi = ints @ proj_D                                   # int_E Pi^2 phi

    # edge integrals of phi|_e against m_a (a < 3), exact with 3 Gauss points
    ephi = np.zeros((N, 3, nd))
    for i in range(N):
        a, b = edge_endpoints(geom, i)
        pts, w = edge_rule(a, b, 4)
        s = np.hypot(*(pts - a).T)
        tr = (trace_start[i] + s[:, None] * diff[i] / geom.lengths[i]
              + 0.5 * (s[:, None] ** 2 - geom.lengths[i] * s[:, None]) * slope[i])
        m = b1.values(pts)
        ephi[i] = np.einsum("q,qa,qd->ad", w, m, tr)

    h = geom.diameter
    dm = np.array([[0.0, 0.0], [1.0 / h, 0.0], [0.0, 1.0 / h]])   # grad m_a, a < 3
    rhs_curl = np.zeros((6, nd))
    rhs_grad = np.zeros((6, nd))
    for c in range(2):
        for a in range(3):
            row = 3 * c + a
            # rot chi and div chi for chi = m_a e_c
            rot = -dm[a, 1] if c == 0 else dm[a, 0]
            div = dm[a, c]
            rhs_curl[row] = rot * mean_phi - np.einsum("e,ed->d", geom.tangents[:, c], ephi[:, a, :])
            rhs_grad[row] = -div * mean_phi + np.einsum("e,ed->d", geom.normals[:, c], ephi[:, a, :])
    M6 = np.zeros((6, 6))
    M6[:3, :3] = M6[3:, 3:] = mass1
    curl_l2 = np.linalg.solve(M6, rhs_curl)
    grad_l2 = np.linalg.solve(M6, rhs_grad)

    Id = np.eye(nd)
    R = Id - D @ proj_D
    if stab_scaling == "homogenized":
        # edge rows become h_E times the mean normal derivative, the scale of a vertex value
        w = np.concatenate([np.ones(N), h / geom.lengths])
        R = w[:, None] * R
    stiffness = proj_D.T @ hess_gram @ proj_D + R.T @ R / h**2
    stiffness = 0.5 * (stiffness + stiffness.T)
    trilinear = grad_l2.T @ M6 @ curl_l2

    return MorleyLocalOps(geom, basis, proj_D, D, hess_gram, curl_grad, lap, curl_l2, grad_l2,
                          mass1, stiffness, trilinear, trace_start, diff, slope)


def local_interpolant(geom: CellGeometry, f, grad_f, degree: int = 8) -> np.ndarray:
    """Vertex values and outward edge moments of int_e grad f . n_E."""
    N = geom.n_vertices
    out = np.empty(2 * N)
    out[:N] = f(geom.vertices)
    for i in range(N):
        a, b = edge_endpoints(geom, i)
        pts, w = edge_rule(a, b, degree)
        out[N + i] = w @ (grad_f(pts) @ geom.normals[i])
    return out


# --------------------------------------------------------------- global side


class MorleySpace:
    """Global Morley-type space on a mesh: DOF layout plus all local operators.

    Global DOFs: one value per vertex (index = vertex id) followed by one
    edge moment per edge (index = n_vertices + edge id) taken with the stored
    edge normal.  ``cell_dofs[k]`` / ``cell_signs[k]`` map the local vector
    of cell k to global indices and signs.
    """

    def __init__(self, mesh: PolygonalMesh, stab_scaling: str = "paper"):
        self.mesh = mesh
        self.stab_scaling = stab_scaling
        nv = mesh.n_vertices
        self.n_dofs = nv + mesh.n_edges
        self.cell_dofs = []
        self.cell_signs = []
        self.ops = []
        for k in range(mesh.n_cells):
            c = mesh.cells[k]
            self.cell_dofs.append(np.concatenate([c, nv + mesh.cell_edges[k]]))
            self.cell_signs.append(np.concatenate([np.ones(len(c)), mesh.cell_edge_signs[k]]).astype(float))
            self.ops.append(build_local_ops(mesh.geometry(k), stab_scaling))
        self.boundary_dofs = np.concatenate([np.flatnonzero(mesh.vertex_boundary),
                                             nv + np.flatnonzero(mesh.edge_boundary)])
        free = np.ones(self.n_dofs, dtype=bool)
        free[self.boundary_dofs] = False
        self.free_dofs = np.flatnonzero(free)
        # flattened layout for the compiled kernels
        nds = np.array([len(d) for d in self.cell_dofs], dtype=np.int64)
        self.dof_ptr = np.concatenate([[0], np.cumsum(nds)]).astype(np.int64)
        self.mat_ptr = np.concatenate([[0], np.cumsum(nds**2)]).astype(np.int64)
        self.flat_dofs = np.concatenate(self.cell_dofs).astype(np.int64)
        self.flat_signs = np.concatenate(self.cell_signs)
        self.flat_trilinear = np.concatenate([op.trilinear.ravel() for op in self.ops])
        self.flat_lap = np.concatenate([op.lap for op in self.ops])
        self.flat_stiffness = np.concatenate([op.stiffness.ravel() for op in self.ops])

    def local(self, k: int, global_vec: np.ndarray) -> np.ndarray:
        return self.cell_signs[k] * global_vec[self.cell_dofs[k]]

    def interpolate(self, f, grad_f, degree: int = 8) -> np.ndarray:
        """Global DOF vector: vertex values and int_e grad f . n_e."""
        mesh = self.mesh
        out = np.empty(self.n_dofs)
        out[:mesh.n_vertices] = f(np.asarray(mesh.vertices))
        pts, w = edge_rule(np.zeros(2), np.array([1.0, 0.0]), degree)
        s = pts[:, 0]
        a = mesh.vertices[mesh.edges[:, 0]]
        b = mesh.vertices[mesh.edges[:, 1]]
        P = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
        G = grad_f(P.reshape(-1, 2)).reshape(mesh.n_edges, len(s), 2)
        dn = np.einsum("eqi,ei->eq", G, mesh.edge_normal)
        out[mesh.n_vertices:] = (dn * w[None, :]).sum(1) * mesh.edge_length
        return out

    # per-cell projector applications -----------------------------------

    def proj_D(self, psi):
        return np.array([op.proj_D @ self.local(k, psi) for k, op in enumerate(self.ops)])

    def curl_l2(self, psi):
        return np.array([op.curl_l2 @ self.local(k, psi) for k, op in enumerate(self.ops)])

    def grad_l2(self, psi):
        return np.array([op.grad_l2 @ self.local(k, psi) for k, op in enumerate(self.ops)])

    def curl_grad(self, psi):
        return np.array([op.curl_grad @ self.local(k, psi) for k, op in enumerate(self.ops)])

    def lap(self, psi):
        return np.array([op.lap @ self.local(k, psi) for k, op in enumerate(self.ops)])


def stokes_complex_map(mesh: PolygonalMesh, psi: np.ndarray) -> np.ndarray:
    """CR dofs (edge averages, shape (ne, 2)) of curl psi_h.

    h_e^-1 int_e curl psi = h_e^-1 [(psi(v2) - psi(v1)) n_e - mu_e t_e].
    """
    nv = mesh.n_vertices
    dpsi = psi[mesh.edges[:, 1]] - psi[mesh.edges[:, 0]]
    mu = psi[nv:]
    return (dpsi[:, None] * mesh.edge_normal - mu[:, None] * mesh.edge_tangent) / mesh.edge_length[:, None]
