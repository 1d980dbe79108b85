"""Recovered fields, discrete error norms, convergence rates and CSV output."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exact import ExactSolution
from .morley import MorleySpace
from .quadrature import MeshQuadrature, exponents

CSV_VERSION = "morley-ns results v1"
CSV_COLUMNS = ["h", "E2_psi", "R2_psi", "E1_psi", "R1_psi", "E0_psi", "R0_psi",
               "E1_u", "R1_u", "E0_u", "R0_u", "E0_w", "R0_w", "E0_p", "R0_p", "newton_iters"]
ERROR_KEYS = ["E2_psi", "E1_psi", "E0_psi", "E1_u", "E0_u", "E0_w", "E0_p"]


@dataclass
class RecoveredFields:
    stream: np.ndarray      # (nc, 6) Pi^D psi_h
    velocity: np.ndarray    # (nc, 6) Pi^1 curl psi_h, layout [ux(1, xi, eta), uy(1, xi, eta)]
    vorticity: np.ndarray   # (nc,)   -Pi^0 Lap psi_h


def recover_fields(space: MorleySpace, psi: np.ndarray) -> RecoveredFields:
    return RecoveredFields(space.proj_D(psi), space.curl_l2(psi), -space.lap(psi))


def _monomial_derivs(quad: MeshQuadrature, mesh, k: int):
    """Values, gradients and Hessians of each point's own scaled monomials."""
    c = np.asarray(mesh.cell_centroid)[quad.cell]
    h = np.asarray(mesh.cell_diameter)[quad.cell]
    xi = (quad.points[:, 0] - c[:, 0]) / h
    eta = (quad.points[:, 1] - c[:, 1]) / h
    ex = exponents(k)
    n = len(xi)

    def mono(a, b):
        if a < 0 or b < 0:
            return np.zeros(n)
        return xi**a * eta**b

    val = np.column_stack([mono(a, b) for a, b in ex])
    grad = np.stack([np.column_stack([a * mono(a - 1, b) for a, b in ex]) / h[:, None],
                     np.column_stack([b * mono(a, b - 1) for a, b in ex]) / h[:, None]], axis=-1)
    h2 = (h**2)[:, None]
    hxx = np.column_stack([a * (a - 1) * mono(a - 2, b) for a, b in ex]) / h2
    hxy = np.column_stack([a * b * mono(a - 1, b - 1) for a, b in ex]) / h2
    hyy = np.column_stack([b * (b - 1) * mono(a, b - 2) for a, b in ex]) / h2
    hess = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -1)
    return val, grad, hess


def domain_mean(quad: MeshQuadrature, fn) -> float:
    return float(quad.weights @ fn(quad.points) / quad.weights.sum())


def error_norms(space: MorleySpace, psi: np.ndarray, exact: ExactSolution,
                p_h: np.ndarray | None = None, degree: int = 8,
                fields: RecoveredFields | None = None,
                quad: MeshQuadrature | None = None) -> dict[str, float]:
    """Broken error norms of psi_h, recovered u_h, omega_h and (optionally) p_h.

    The exact pressure is shifted to zero mean over the mesh before comparison.
    """
    for name in ("psi", "grad_psi", "hess_psi", "u", "grad_u", "omega"):
        if getattr(exact, name, None) is None:
            raise ValueError(f"exact solution is missing {name}")
    mesh = space.mesh
    quad = MeshQuadrature.build(mesh, degree) if quad is None else quad
    fields = recover_fields(space, psi) if fields is None else fields
    val, grad, hess = _monomial_derivs(quad, mesh, 2)
    cP = fields.stream[quad.cell]                      # (npts, 6)
    pts = quad.points
    w = quad.weights

    def norm(sq):
        return math.sqrt(max(float(w @ sq), 0.0))

    e0 = exact.psi(pts) - (val * cP).sum(1)
    e1 = exact.grad_psi(pts) - np.einsum("qa,qai->qi", cP, grad)
    e2 = exact.hess_psi(pts) - np.einsum("qa,qaij->qij", cP, hess)
    cu = fields.velocity[quad.cell]
    uh = np.stack([(val[:, :3] * cu[:, :3]).sum(1), (val[:, :3] * cu[:, 3:]).sum(1)], -1)
    guh = np.stack([np.einsum("qa,qai->qi", cu[:, :3], grad[:, :3]),
                    np.einsum("qa,qai->qi", cu[:, 3:], grad[:, :3])], 1)
    eu0 = exact.u(pts) - uh
    eu1 = exact.grad_u(pts) - guh
    ew = exact.omega(pts) - fields.vorticity[quad.cell]
    out = {
        "h": mesh.h,
        "E2_psi": norm((e2**2).sum((1, 2))),
        "E1_psi": norm((e1**2).sum(1)),
        "E0_psi": norm(e0**2),
        "E1_u": norm((eu1**2).sum((1, 2))),
        "E0_u": norm((eu0**2).sum(1)),
        "E0_w": norm(ew**2),
        "E0_p": float("nan"),
    }
    if p_h is not None and exact.p is not None:
        pmean = domain_mean(quad, exact.p)
        ep = exact.p(pts) - pmean - np.asarray(p_h)[quad.cell]
        out["E0_p"] = norm(ep**2)
    return out


def convergence_rates(rows: list[dict], keys=ERROR_KEYS) -> list[dict]:
    """R = log(e_coarse / e_fine) / log(h_coarse / h_fine); None for the first row
    or when an error is zero or missing."""
    rates = [dict.fromkeys(keys) for _ in rows]
    for i in range(1, len(rows)):
        a, b = rows[i - 1], rows[i]
        for k in keys:
            ea, eb = a.get(k), b.get(k)
            if ea and eb and ea > 0 and eb > 0 and math.isfinite(ea) and math.isfinite(eb):
                rates[i][k] = math.log(ea / eb) / math.log(a["h"] / b["h"])
    return rates


def least_squares_slope(h, e) -> float:
    return float(np.polyfit(np.log(np.asarray(h, float)), np.log(np.asarray(e, float)), 1)[0])


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.6e}"


def write_csv(path, rows: list[dict], comment: str | None = None) -> None:
    rates = convergence_rates(rows)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION}" + (f"; {comment}" if comment else "") + "\n")
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for row, rate in zip(rows, rates):
            line = []
            for col in CSV_COLUMNS:
                if col.startswith("R"):
                    line.append(_fmt(rate.get("E" + col[1:])))
                else:
                    line.append(_fmt(row.get(col)))
            wr.writerow(line)


def read_csv(path) -> list[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for rec in csv.DictReader(lines):
        out.append({k: (float(v) if v not in ("", None) else None) for k, v in rec.items()})
    return out


# ------------------------------------------------------------- sampling


def locate_points(mesh, pts: np.ndarray) -> np.ndarray:
    """Owning cell of each point (-1 outside); first match wins on shared edges."""
    pts = np.asarray(pts, dtype=float)
    owner = np.full(len(pts), -1)
    tol = 1e-12
    for k in range(mesh.n_cells):
        xy = mesh.vertices[mesh.cells[k]]
        lo, hi = xy.min(0) - tol, xy.max(0) + tol
        cand = np.flatnonzero((owner < 0) & np.all((pts >= lo) & (pts <= hi), axis=1))
        if len(cand) == 0:
            continue
        P = pts[cand]
        a = xy
        b = np.roll(xy, -1, axis=0)
        cross = ((b[:, 0] - a[:, 0])[None] * (P[:, 1, None] - a[:, 1][None])
                 - (b[:, 1] - a[:, 1])[None] * (P[:, 0, None] - a[:, 0][None]))
        scale = np.hypot(*(b - a).T)[None]
        inside = np.all(cross >= -tol * scale, axis=1)
        if not inside.all():
            # non-convex cell: even-odd ray casting
            yi, yj = a[:, 1][None], b[:, 1][None]
            xi, xj = a[:, 0][None], b[:, 0][None]
            px, py = P[:, 0, None], P[:, 1, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                hit = ((yi > py) != (yj > py)) & (px < (xj - xi) * (py - yi) / (yj - yi) + xi)
            inside |= (hit.sum(1) % 2 == 1)
        owner[cand[inside]] = k
    return owner


def sample_fields(space: MorleySpace, psi: np.ndarray, p_h: np.ndarray | None = None,
                  n: int = 101, fields: RecoveredFields | None = None) -> np.ndarray:
    """(n*n, 4) rows x, y, psi, p on a uniform grid over the mesh bounding box.

    Points outside the domain carry NaN.
    """
    mesh = space.mesh
    fields = recover_fields(space, psi) if fields is None else fields
    lo, hi = mesh.vertices.min(0), mesh.vertices.max(0)
    gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n), indexing="xy")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    owner = locate_points(mesh, pts)
    out = np.full((len(pts), 4), np.nan)
    out[:, :2] = pts
    ok = owner >= 0
    k = owner[ok]
    c = np.asarray(mesh.cell_centroid)[k]
    h = np.asarray(mesh.cell_diameter)[k]
    xi = (pts[ok, 0] - c[:, 0]) / h
    eta = (pts[ok, 1] - c[:, 1]) / h
    mono = np.column_stack([xi**a * eta**b for a, b in exponents(2)])
    out[ok, 2] = (mono * fields.stream[k]).sum(1)
    if p_h is not None:
        out[ok, 3] = np.asarray(p_h)[k]
    return out


def write_fields_csv(path, samples: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION} sampled fields\n")
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "psi", "p"])
        for row in samples:
            wr.writerow(["" if not np.isfinite(v) else f"{v:.8e}" for v in row])
