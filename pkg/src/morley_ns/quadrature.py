"""Scaled monomials and exact-degree quadrature on polygons and edges."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from .mesh import CellGeometry, polygon_centroid, signed_area


@lru_cache(maxsize=None)
def exponents(k: int) -> tuple[tuple[int, int], ...]:
    """Multi-indices of total degree <= k ordered 1, x, y, x^2, xy, y^2, ..."""
    return tuple((d - j, j) for d in range(k + 1) for j in range(d + 1))


def dim_poly(k: int) -> int:
    return (k + 1) * (k + 2) // 2


@dataclass(frozen=True)
class ScaledMonomialBasis:
    """m_a(x) = ((x - x_E) / h_E)^a for |a| <= degree."""

    centroid: np.ndarray
    diameter: float
    degree: int

    @classmethod
    def of(cls, geom: CellGeometry, degree: int = 2) -> "ScaledMonomialBasis":
        return cls(np.asarray(geom.centroid), float(geom.diameter), degree)

    @property
    def size(self) -> int:
        return dim_poly(self.degree)

    def _xi(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (pts[:, 0] - self.centroid[0]) / self.diameter, (pts[:, 1] - self.centroid[1]) / self.diameter

    def values(self, pts) -> np.ndarray:
        """(npts, size) array of basis values."""
        xi, eta = self._xi(pts)
        return np.column_stack([xi**a * eta**b for a, b in exponents(self.degree)])

    def gradients(self, pts) -> np.ndarray:
        """(npts, size, 2) array of basis gradients."""
        xi, eta = self._xi(pts)
        h = self.diameter
        out = np.zeros((len(xi), self.size, 2))
        for i, (a, b) in enumerate(exponents(self.degree)):
            if a:
                out[:, i, 0] = a * xi ** (a - 1) * eta**b / h
            if b:
                out[:, i, 1] = b * xi**a * eta ** (b - 1) / h
        return out

    def hessians(self, pts) -> np.ndarray:
        """(npts, size, 2, 2) array of basis Hessians."""
        xi, eta = self._xi(pts)
        h2 = self.diameter**2
        out = np.zeros((len(xi), self.size, 2, 2))
        for i, (a, b) in enumerate(exponents(self.degree)):
            if a >= 2:
                out[:, i, 0, 0] = a * (a - 1) * xi ** (a - 2) * eta**b / h2
            if b >= 2:
                out[:, i, 1, 1] = b * (b - 1) * xi**a * eta ** (b - 2) / h2
            if a and b:
                out[:, i, 0, 1] = out[:, i, 1, 0] = a * b * xi ** (a - 1) * eta ** (b - 1) / h2
        return out


# ------------------------------------------------------------------- rules


@lru_cache(maxsize=None)
def _gauss_legendre01(m: int):
    x, w = leggauss(m)
    return 0.5 * (x + 1), 0.5 * w


@lru_cache(maxsize=None)
def _triangle_reference(d: int):
    """Collapsed (Duffy) Gauss-Jacobi x Gauss-Legendre rule on the unit
    triangle, exact for total degree d.  Returns barycentric-like (s, t, w)
    with point = A + s (B - A) + t (C - A) and weights summing to 1/2."""
    m = max(1, ceil((d + 1) / 2))
    xj, wj = roots_jacobi(m, 0.0, 1.0)
    u = 0.5 * (xj + 1)
    wu = wj / 4.0
    v, wv = _gauss_legendre01(m)
    U, Vv = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    s = (U * (1 - Vv)).ravel()
    t = (U * Vv).ravel()
    return s, t, W.ravel()


def triangle_rule(tri: np.ndarray, d: int):
    s, t, w = _triangle_reference(d)
    A, B, C = tri
    pts = A + np.outer(s, B - A) + np.outer(t, C - A)
    area2 = abs((B[0] - A[0]) * (C[1] - A[1]) - (B[1] - A[1]) * (C[0] - A[0]))
    return pts, w * area2


def ear_clip(xy: np.ndarray) -> list[tuple[int, int, int]]:
    """Ear-clipping triangulation of a simple counterclockwise polygon."""
    idx = list(range(len(xy)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3 and guard < 10 * len(xy) ** 2:
        guard += 1
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            a, b, c = xy[i0], xy[i1], xy[i2]
            if cross(a, b, c) <= 0:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = xy[j]
                if cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0:
                    inside = True
                    break
            if not inside:
                tris.append((i0, i1, i2))
                idx.pop(k)
                break
        else:
            raise ValueError("ear clipping failed: polygon not simple")
    tris.append(tuple(idx))
    return tris


def triangulate(xy: np.ndarray, centroid: np.ndarray | None = None) -> list[np.ndarray]:
    """Centroid fan when every fan triangle is positive, ear clipping otherwise."""
    n = len(xy)
    if n == 3:
        return [xy.copy()]
    c = polygon_centroid(xy) if centroid is None else centroid
    fan = [np.array([c, xy[i], xy[(i + 1) % n]]) for i in range(n)]
    if all(signed_area(t) > 1e-14 * abs(signed_area(xy)) for t in fan):
        return fan
    return [xy[list(t)] for t in ear_clip(xy)]


@dataclass(frozen=True)
class PolygonQuadrature:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))


def polygon_rule(geom: CellGeometry | np.ndarray, d: int) -> PolygonQuadrature:
    """Quadrature on a polygon, exact for polynomials of total degree ``d``."""
    if isinstance(geom, CellGeometry):
        xy, c = geom.vertices, geom.centroid
    else:
        xy, c = np.asarray(geom, dtype=float), None
    pts, wts = [], []
    for tri in triangulate(xy, c):
        p, w = triangle_rule(tri, d)
        pts.append(p)
        wts.append(w)
    return PolygonQuadrature(np.vstack(pts), np.concatenate(wts), d)


def edge_rule(a, b, d: int):
    """Gauss-Legendre points and weights on segment [a, b], exact for degree d."""
    m = max(1, ceil((d + 1) / 2))
    s, w = _gauss_legendre01(m)
    a, b = np.asarray(a, float), np.asarray(b, float)
    L = float(np.hypot(*(b - a)))
    return a + np.outer(s, b - a), w * L


# ---------------------------------------------------------------- moments


def monomial_integrals(geom: CellGeometry, k: int) -> np.ndarray:
    """Exact integrals of the scaled monomials of degree <= k over the cell.

    Uses the Euler identity for homogeneous polynomials,
    int_E p = (2 + q)^-1 int_dE p (z . n) for p homogeneous of degree q in
    z = (x - x_E) / h_E, which reduces everything to Gauss rules on edges.
    """
    basis = ScaledMonomialBasis.of(geom, k)
    h = geom.diameter
    out = np.zeros(basis.size)
    n = geom.n_vertices
    for i in range(n):
        a, b = geom.vertices[i], geom.vertices[(i + 1) % n]
        pts, w = edge_rule(a, b, k + 1)
        z = (pts - geom.centroid) / h
        zn = z @ geom.normals[i]
        vals = basis.values(pts)
        out += (w * zn) @ vals * h
    degs = np.array([a + b for a, b in exponents(k)])
    return out / (2 + degs)


def mass_matrix(geom: CellGeometry, k: int) -> np.ndarray:
    """L2 Gram matrix of the scaled monomials of degree <= k."""
    big = monomial_integrals(geom, 2 * k)
    lookup = {e: i for i, e in enumerate(exponents(2 * k))}
    ex = exponents(k)
    M = np.empty((len(ex), len(ex)))
    for i, (a1, b1) in enumerate(ex):
        for j, (a2, b2) in enumerate(ex):
            M[i, j] = big[lookup[(a1 + a2, b1 + b2)]]
    return M


def monomial_moments(geom: CellGeometry, k: int = 2) -> dict[str, np.ndarray]:
    """Mass matrix, plain integrals, and H1 / H2 seminorm Gram matrices."""
    M = mass_matrix(geom, k)
    ints = monomial_integrals(geom, k)
    q = polygon_rule(geom, 2 * k)
    basis = ScaledMonomialBasis.of(geom, k)
    G = basis.gradients(q.points)
    H = basis.hessians(q.points)
    G1 = np.einsum("q,qai,qbi->ab", q.weights, G, G)
    G2 = np.einsum("q,qaij,qbij->ab", q.weights, H, H)
    if not np.all(np.linalg.eigvalsh(M) > 0):
        raise np.linalg.LinAlgError("singular monomial mass matrix (degenerate cell)")
    return {"mass": M, "integrals": ints, "h1": G1, "h2": G2}


@dataclass(frozen=True)
class MeshQuadrature:
    """Concatenated polygon rules for every cell of a mesh.

    ``cell[q]`` is the owning cell of point q; ``ptr`` delimits each cell's
    block so per-cell sums are ``np.add.reduceat(values, ptr[:-1])``.
    """

    points: np.ndarray
    weights: np.ndarray
    cell: np.ndarray
    ptr: np.ndarray
    degree: int

    @classmethod
    def build(cls, mesh, d: int) -> "MeshQuadrature":
        pts, wts, owner = [], [], []
        for k in range(mesh.n_cells):
            q = polygon_rule(mesh.geometry(k), d)
            pts.append(q.points)
            wts.append(q.weights)
            owner.append(np.full(len(q.weights), k))
        counts = np.array([len(w) for w in wts])
        ptr = np.concatenate([[0], np.cumsum(counts)])
        return cls(np.vstack(pts), np.concatenate(wts), np.concatenate(owner), ptr, d)

    def cell_sum(self, values: np.ndarray) -> np.ndarray:
        """Per-cell sums of weighted values; ``values`` has the point axis first."""
        v = values * self.weights.reshape((-1,) + (1,) * (values.ndim - 1))
        return np.add.reduceat(v, self.ptr[:-1], axis=0)

    def monomials(self, mesh, k: int) -> np.ndarray:
        """(npts, dim_poly(k)) scaled monomials of each point's own cell."""
        c = np.asarray(mesh.cell_centroid)[self.cell]
        h = np.asarray(mesh.cell_diameter)[self.cell]
        xi = (self.points[:, 0] - c[:, 0]) / h
        eta = (self.points[:, 1] - c[:, 1]) / h
        return np.column_stack([xi**a * eta**b for a, b in exponents(k)])
