import numpy as np
import pytest

from morley_ns.mesh import (CellGeometry, generate_square_mesh, generate_trapezoid_mesh,
                            generate_triangle_mesh, generate_voronoi_mesh, kernel_radius)


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_convex_polygon(rng, n=None):
    n = n or int(rng.integers(3, 9))
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = rng.uniform(0.6, 1.0, n)
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    from scipy.spatial import ConvexHull
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def random_star_polygon(rng, n=None):
    """Non-convex but star-shaped with respect to the origin."""
    n = n or int(rng.integers(5, 10))
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    while np.min(np.diff(np.r_[ang, ang[0] + 2 * np.pi])) < 0.2:
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = rng.uniform(0.4, 1.0, n)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def family_cells(rng):
    """One cell from each mesh family, randomly rotated, scaled and shifted."""
    meshes = [generate_square_mesh(3), generate_triangle_mesh(3), generate_trapezoid_mesh(4),
              generate_voronoi_mesh(16, lloyd_iters=5, rng_seed=int(rng.integers(1000)))]
    out = []
    for m in meshes:
        k = int(rng.integers(m.n_cells))
        xy = m.vertices[m.cells[k]]
        out.append(xy)
    return out


def shape_regular(xy, rho=0.1):
    g = CellGeometry.from_vertices(xy)
    return kernel_radius(g) >= rho * g.diameter and g.lengths.min() >= rho * g.diameter


def random_polygons(seed, count):
    """At least ``count`` polygons drawn from the four families plus random shapes."""
    rng = np.random.default_rng(seed)
    polys = []
    while len(polys) < count:
        polys.extend(family_cells(rng))
        # random shapes must meet the same regularity bound as generated meshes
        for xy in (random_convex_polygon(rng), random_star_polygon(rng)):
            if shape_regular(xy):
                polys.append(xy)
    geoms = []
    for xy in polys:
        s = 10.0 ** rng.uniform(-2, 0.5)
        xy = s * (xy - xy.mean(0)) @ rotation(rng.uniform(0, 2 * np.pi)).T + rng.uniform(-3, 3, 2)
        geoms.append(CellGeometry.from_vertices(xy))
    return geoms


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def polygons():
    return random_polygons(7, 40)
