"""Polygonal meshes: data structure, generators, text I/O and shape diagnostics.

A mesh is built from a vertex array and a list of counterclockwise vertex
loops.  Edges are discovered from the loops; each edge is oriented along the
counterclockwise traversal of its lowest-numbered adjacent cell, so the stored
unit normal is outward for that cell (and outward from the domain on the
boundary).  Cells store, per local edge, the sign relating the stored edge
normal to their own outward normal.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Voronoi


class MeshError(ValueError):
    """Invalid mesh input."""


class MeshFormatError(MeshError):
    """Malformed mesh file."""


class MalformedCountsError(MeshFormatError):
    pass


class DanglingIndexError(MeshFormatError):
    pass


class DegenerateCellError(MeshError):
    pass


def signed_area(xy: np.ndarray) -> float:
    # shift to the vertex mean: the shoelace sum cancels badly for small cells far from 0
    xy = xy - xy.mean(0)
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(xy: np.ndarray) -> np.ndarray:
    shift = xy.mean(0)
    xy = xy - shift
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    return shift + np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def polygon_diameter(xy: np.ndarray) -> float:
    d = xy[:, None, :] - xy[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def is_simple(xy: np.ndarray) -> bool:
    """True when no two non-adjacent edges of the closed loop cross."""
    n = len(xy)
    if n < 3:
        return False
    if n == 3:
        return abs(signed_area(xy)) > 0
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(xy[i], xy[(i + 1) % n], xy[j], xy[(j + 1) % n]):
                return False
    return True


@dataclass(frozen=True)
class CellGeometry:
    """Geometry of one polygon as seen by the local element routines.

    Edge ``i`` runs from vertex ``i`` to vertex ``i+1`` (counterclockwise);
    ``normals`` are outward, ``tangents`` follow the loop, ``t = (-n_y, n_x)``.
    """

    vertices: np.ndarray
    area: float
    centroid: np.ndarray
    diameter: float
    lengths: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @classmethod
    def from_vertices(cls, xy) -> "CellGeometry":
        xy = np.asarray(xy, dtype=float)
        area = signed_area(xy)
        if area <= 0:
            raise DegenerateCellError("cell must be counterclockwise with positive area")
        d = np.roll(xy, -1, axis=0) - xy
        lengths = np.sqrt((d**2).sum(1))
        if np.any(lengths <= 0):
            raise DegenerateCellError("zero-length edge")
        tangents = d / lengths[:, None]
        normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
        return cls(xy, area, polygon_centroid(xy), polygon_diameter(xy), lengths, normals, tangents)


class PolygonalMesh:
    """Immutable polygonal mesh.

    Parameters
    ----------
    vertices : (nv, 2) array
    cells : sequence of counterclockwise vertex-index loops
    edges : optional (ne, 2) array fixing the edge numbering and orientation
        (used by the file reader to round-trip exactly).
    """

    def __init__(self, vertices, cells, edges=None):
        vertices = np.array(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or not np.all(np.isfinite(vertices)):
            raise MeshError("vertices must be a finite (nv, 2) array")
        nv = len(vertices)
        loops = []
        for k, c in enumerate(cells):
            c = np.array(c, dtype=np.int64)
            if len(c) < 3:
                raise MeshError(f"cell {k} has fewer than 3 vertices")
            if c.min() < 0 or c.max() >= nv:
                raise DanglingIndexError(f"cell {k} references a vertex outside 0..{nv - 1}")
            if len(set(c.tolist())) != len(c):
                raise DegenerateCellError(f"cell {k} repeats a vertex")
            xy = vertices[c]
            a = signed_area(xy)
            if a == 0 or not is_simple(xy):
                raise DegenerateCellError(f"cell {k} is not a simple polygon of positive area")
            if a < 0:
                raise DegenerateCellError(f"cell {k} is clockwise")
            loops.append(c)

        edge_index: dict[tuple[int, int], int] = {}
        edge_list: list[tuple[int, int]] = []
        if edges is not None:
            for a, b in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
                key = (min(a, b), max(a, b))
                if key in edge_index:
                    raise MeshError(f"duplicate edge {key}")
                edge_index[key] = len(edge_list)
                edge_list.append((int(a), int(b)))
        edge_cells: dict[int, list[int]] = {}
        cell_edges, cell_signs = [], []
        for k, c in enumerate(loops):
            ce, cs = [], []
            for i in range(len(c)):
                a, b = int(c[i]), int(c[(i + 1) % len(c)])
                key = (min(a, b), max(a, b))
                if key not in edge_index:
                    if edges is not None:
                        raise MeshError(f"cell {k} uses edge {key} missing from the edge list")
                    edge_index[key] = len(edge_list)
                    edge_list.append((a, b))
                e = edge_index[key]
                owners = edge_cells.setdefault(e, [])
                if len(owners) == 2:
                    raise MeshError(f"edge {key} shared by more than two cells")
                owners.append(k)
                ce.append(e)
                cs.append(1 if edge_list[e] == (a, b) else -1)
            cell_edges.append(np.array(ce, dtype=np.int64))
            cell_signs.append(np.array(cs, dtype=np.int64))

        ne = len(edge_list)
        if len(edge_cells) != ne:
            raise MeshError("edge list contains edges not used by any cell")
        E = np.array(edge_list, dtype=np.int64).reshape(-1, 2)
        ec = np.full((ne, 2), -1, dtype=np.int64)
        for e, owners in edge_cells.items():
            ec[e, : len(owners)] = owners
        # an edge must be oriented counterclockwise for its first (lowest) cell;
        # a supplied edge list may disagree, in which case flip it
        for e in range(ne):
            k = ec[e, 0]
            j = int(np.where(cell_edges[k] == e)[0][0])
            if cell_signs[k][j] < 0:
                E[e] = E[e, ::-1]
                for kk in ec[e]:
                    if kk >= 0:
                        jj = np.where(cell_edges[kk] == e)[0][0]
                        cell_signs[kk][jj] *= -1

        d = vertices[E[:, 1]] - vertices[E[:, 0]]
        length = np.sqrt((d**2).sum(1))
        if np.any(length <= 0):
            raise DegenerateCellError("zero-length edge")
        tangent = d / length[:, None]
        normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
        tangent = np.column_stack([-normal[:, 1], normal[:, 0]])

        edge_boundary = ec[:, 1] < 0
        vertex_boundary = np.zeros(nv, dtype=bool)
        vertex_boundary[E[edge_boundary].ravel()] = True
        used = np.zeros(nv, dtype=bool)
        for c in loops:
            used[c] = True
        if not used.all():
            raise MeshError("mesh has vertices not used by any cell")

        self.vertices = vertices
        self.vertex_boundary = vertex_boundary
        self.edges = E
        self.edge_cells = ec
        self.edge_boundary = edge_boundary
        self.edge_length = length
        self.edge_normal = normal
        self.edge_tangent = tangent
        self.cells = loops
        self.cell_edges = cell_edges
        self.cell_edge_signs = cell_signs
        self._geoms = [CellGeometry.from_vertices(vertices[c]) for c in loops]
        self.cell_area = np.array([g.area for g in self._geoms])
        self.cell_centroid = np.array([g.centroid for g in self._geoms]).reshape(-1, 2)
        self.cell_diameter = np.array([g.diameter for g in self._geoms])
        for arr in (self.vertices, self.vertex_boundary, self.edges, self.edge_cells,
                    self.edge_boundary, self.edge_length, self.edge_normal, self.edge_tangent,
                    self.cell_area, self.cell_centroid, self.cell_diameter):
            arr.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def h(self) -> float:
        return float(self.cell_diameter.max())

    @property
    def area(self) -> float:
        return float(self.cell_area.sum())

    def geometry(self, k: int) -> CellGeometry:
        return self._geoms[k]

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_cells

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolygonalMesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.edges, other.edges)
            and len(self.cells) == len(other.cells)
            and all(np.array_equal(a, b) for a, b in zip(self.cells, other.cells))
        )

    def __repr__(self) -> str:
        return (f"PolygonalMesh(nv={self.n_vertices}, ne={self.n_edges}, "
                f"nc={self.n_cells}, h={self.h:.4g})")


# ---------------------------------------------------------------- generators


def _grid_vertices(n: int, x0=0.0, x1=1.0, y0=0.0, y1=1.0):
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def generate_square_mesh(n: int) -> PolygonalMesh:
    """``n`` x ``n`` unit squares of side 1/n on [0, 1]^2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    V = _grid_vertices(n)
    idx = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = [[idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]
             for j in range(n) for i in range(n)]
    return PolygonalMesh(V, cells)


def generate_triangle_mesh(n: int, domain: str = "unit-square", diagonal: str = "right") -> PolygonalMesh:
    """Structured right-triangle mesh, each grid square split by one diagonal.

    ``domain="unit-square"`` is [0, 1]^2 with ``n`` divisions per side.
    ``domain="l-shaped"`` is [-1, 1]^2 minus (0, 1) x (-1, 0) with ``n``
    divisions per side of the bounding square; ``n`` must be even so the
    re-entrant corner is a grid vertex.  ``diagonal="right"`` splits along
    the (i, j)-(i+1, j+1) diagonal, ``"left"`` along the other one.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if diagonal not in ("right", "left"):
        raise ValueError(f"unknown diagonal {diagonal!r}")
    if domain in ("unit-square", "unit"):
        V = _grid_vertices(n)
        keep = lambda i, j: True  # noqa: E731
    elif domain in ("l-shaped", "lshape"):
        if n % 2:
            raise ValueError("l-shaped domain needs an even n so (0, 0) is a vertex")
        V = _grid_vertices(n, -1.0, 1.0, -1.0, 1.0)
        keep = lambda i, j: not (i >= n // 2 and j < n // 2)  # noqa: E731
    else:
        raise ValueError(f"unknown domain {domain!r}")
    idx = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = []
    for j in range(n):
        for i in range(n):
            if not keep(i, j):
                continue
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            if diagonal == "right":
                cells += [[a, b, c], [a, c, d]]
            else:
                cells += [[a, b, d], [b, c, d]]
    return _compact(V, cells)


def generate_trapezoid_mesh(n: int, offset: float = 0.25) -> PolygonalMesh:
    """Square grid with interior grid rows shifted vertically by +-offset/n.

    The shift alternates in a checkerboard pattern, so each interior cell is
    an isosceles trapezoid with vertical parallel sides.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    V = _grid_vertices(n)
    for j in range(1, n):
        for i in range(n + 1):
            V[j * (n + 1) + i, 1] += offset / n * (-1) ** (i + j)
    idx = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = [[idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]
             for j in range(n) for i in range(n)]
    return PolygonalMesh(V, cells)


def _compact(V, cells) -> PolygonalMesh:
    used = sorted({v for c in cells for v in c})
    remap = {v: k for k, v in enumerate(used)}
    return PolygonalMesh(np.asarray(V)[used], [[remap[v] for v in c] for c in cells])


def _clipped_voronoi(seeds: np.ndarray):
    """Voronoi cells of ``seeds`` clipped to the unit square (mirror trick)."""
    mirrored = [seeds,
                np.column_stack([-seeds[:, 0], seeds[:, 1]]),
                np.column_stack([2 - seeds[:, 0], seeds[:, 1]]),
                np.column_stack([seeds[:, 0], -seeds[:, 1]]),
                np.column_stack([seeds[:, 0], 2 - seeds[:, 1]])]
    vor = Voronoi(np.vstack(mirrored))
    cells = []
    for k in range(len(seeds)):
        region = vor.regions[vor.point_region[k]]
        if -1 in region or len(region) < 3:
            raise MeshError("unbounded Voronoi region for an interior seed")
        cells.append(np.array(region, dtype=np.int64))
    return vor.vertices, cells


def _cvt_cells(seeds):
    V, cells = _clipped_voronoi(seeds)
    out = []
    for c in cells:
        xy = V[c]
        if signed_area(xy) < 0:
            c = c[::-1]
        out.append(c)
    return V, out


def generate_voronoi_mesh(n_seeds: int, lloyd_iters: int = 100, rng_seed: int = 0,
                          seeds: np.ndarray | None = None) -> PolygonalMesh:
    """Centroidal Voronoi tessellation of [0, 1]^2.

    Seeds are drawn uniformly with ``numpy.random.default_rng(rng_seed)``
    unless given explicitly, then moved ``lloyd_iters`` times to the
    centroids of their clipped Voronoi cells.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if seeds is None:
        seeds = np.random.default_rng(rng_seed).random((n_seeds, 2))
    seeds = np.array(seeds, dtype=float)
    if len(seeds) != n_seeds:
        raise ValueError("seed count mismatch")
    if n_seeds == 1:
        return generate_square_mesh(1)
    for _ in range(lloyd_iters):
        V, cells = _cvt_cells(seeds)
        seeds = np.array([polygon_centroid(V[c]) for c in cells])
    if len(np.unique(np.round(seeds, 12), axis=0)) != n_seeds:
        raise MeshError("duplicate seeds after Lloyd relaxation")
    V, cells = _cvt_cells(seeds)
    return _clean_polygons(V, cells)


def _clean_polygons(V, cells, tol=1e-10) -> PolygonalMesh:
    """Snap to the unit-square boundary and merge near-coincident vertices."""
    V = np.array(V, dtype=float)
    V[np.abs(V) < tol] = 0.0
    V[np.abs(V - 1) < tol] = 1.0
    used = sorted({int(v) for c in cells for v in c})
    pts = V[used]
    key = np.round(pts / tol).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    remap = {v: int(inv.ravel()[k]) for k, v in enumerate(used)}
    newV = pts[first]
    out = []
    for c in cells:
        loop = []
        for v in c:
            w = remap[int(v)]
            if not loop or loop[-1] != w:
                loop.append(w)
        if len(loop) > 1 and loop[0] == loop[-1]:
            loop.pop()
        out.append(loop)
    return _compact(newV, out)


# --------------------------------------------------------------- diagnostics


def shape_diagnostics(mesh: PolygonalMesh) -> np.ndarray:
    """Per-cell ``(rho_star, rho_edge)``.

    ``rho_edge = min_e h_e / h_E``.  ``rho_star`` is the radius of the
    largest disc inside the polygon's kernel (Chebyshev centre of the edge
    half-planes, solved as a linear program) divided by ``h_E``; zero when
    the kernel is empty.
    """
    out = np.zeros((mesh.n_cells, 2))
    for k in range(mesh.n_cells):
        g = mesh.geometry(k)
        out[k, 1] = g.lengths.min() / g.diameter
        out[k, 0] = kernel_radius(g) / g.diameter
    return out


def kernel_radius(g: CellGeometry) -> float:
    # half-plane n_i . x <= n_i . v_i for every edge; maximise r
    A = np.column_stack([g.normals, np.ones(g.n_vertices)])
    b = (g.normals * g.vertices).sum(1)
    res = linprog(c=[0, 0, -1], A_ub=A, b_ub=b, bounds=[(None, None), (None, None), (0, None)],
                  method="highs")
    if res.status != 0:
        return 0.0
    return float(max(res.x[2], 0.0))


# ----------------------------------------------------------------------- I/O


def save_mesh(mesh: PolygonalMesh, path) -> None:
    lines = [f"{mesh.n_vertices} {mesh.n_edges} {mesh.n_cells}"]
    for (x, y), b in zip(mesh.vertices, mesh.vertex_boundary):
        lines.append(f"{float(x)!r} {float(y)!r} {int(b)}")
    for (a, b), f in zip(mesh.edges, mesh.edge_boundary):
        lines.append(f"{a} {b} {int(f)}")
    for c in mesh.cells:
        lines.append(" ".join(str(v) for v in [len(c), *c]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path) -> PolygonalMesh:
    """Read the plain-text mesh format; clockwise cells are reoriented with a warning."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines()]
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows or len(rows[0]) != 3:
        raise MalformedCountsError("header must be 'nv ne nc'")
    try:
        nv, ne, nc = (int(t) for t in rows[0])
    except ValueError as exc:
        raise MalformedCountsError("header counts must be integers") from exc
    if min(nv, ne, nc) < 0 or len(rows) != 1 + nv + ne + nc:
        raise MalformedCountsError(
            f"header announces {nv}+{ne}+{nc} records, file has {len(rows) - 1}")
    try:
        V = np.array([[float(r[0]), float(r[1])] for r in rows[1:1 + nv]]).reshape(-1, 2)
        E = np.array([[int(r[0]), int(r[1])] for r in rows[1 + nv:1 + nv + ne]],
                     dtype=np.int64).reshape(-1, 2)
        cells = []
        for r in rows[1 + nv + ne:]:
            k = int(r[0])
            if len(r) != k + 1:
                raise MalformedCountsError(f"cell record announces {k} vertices, has {len(r) - 1}")
            cells.append([int(t) for t in r[1:]])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError(f"unparsable record: {exc}") from exc
    if E.size and (E.min() < 0 or E.max() >= nv):
        raise DanglingIndexError("edge references a missing vertex")
    for k, c in enumerate(cells):
        if min(c) < 0 or max(c) >= nv:
            raise DanglingIndexError(f"cell {k} references vertex {max(c)} of {nv}")
        if signed_area(V[c]) < 0:
            warnings.warn(f"cell {k} is clockwise; reoriented", stacklevel=2)
            cells[k] = c[::-1]
    return PolygonalMesh(V, cells, edges=E)
