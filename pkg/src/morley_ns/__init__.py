"""Morley-type nonconforming virtual elements for the steady Navier-Stokes
equations in stream-function form, with velocity, vorticity and pressure
recovery on polygonal meshes."""
from .kernels import BACKEND
from .mesh import (PolygonalMesh, generate_square_mesh, generate_trapezoid_mesh,
                   generate_triangle_mesh, generate_voronoi_mesh, load_mesh, save_mesh)
from .morley import MorleySpace, build_local_ops
from .crouzeix_raviart import CRSpace, cr_local_ops

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "PolygonalMesh", "generate_square_mesh", "generate_trapezoid_mesh",
    "generate_triangle_mesh", "generate_voronoi_mesh", "load_mesh", "save_mesh",
    "MorleySpace", "build_local_ops", "CRSpace", "cr_local_ops",
]
