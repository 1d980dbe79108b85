"""Newton iteration for the stream-function system and direct sparse solves."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (BoundaryData, apply_trilinear, assemble_A, assemble_pressure_saddle,
                       assemble_trilinear_jacobian)
from .crouzeix_raviart import CRSpace
from .morley import MorleySpace

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class NewtonDivergence(SolverError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


@dataclass
class NewtonConfig:
    tol: float = 1e-8
    max_iters: int = 50
    # "auto": backtracking line search only for small viscosities; "on" / "off" force it
    damping: str = "auto"
    # "residual": stop on the residual test alone; "increment": additionally
    # require |delta| <= tol * max(1, |psi|) for the last update
    criterion: str = "residual"

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("Newton tolerance must be positive")
        if self.damping not in ("auto", "on", "off"):
            raise ValueError("damping must be auto, on or off")
        if self.criterion not in ("residual", "increment"):
            raise ValueError("criterion must be residual or increment")


@dataclass
class SolveReport:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False


def linear_solve(matrix: sp.spmatrix, rhs: np.ndarray, check: float = 1e-10) -> np.ndarray:
    """Sparse LU solve with a relative residual check."""
    A = sp.csc_matrix(matrix)
    if A.shape[0] == 0:
        return np.zeros(0)
    try:
        x = spla.splu(A).solve(np.asarray(rhs, dtype=float))
    except RuntimeError as exc:  # exactly singular factor
        raise SolverError(f"factorization failed ({A.shape[0]} unknowns, nnz={A.nnz}): {exc}") from exc
    nb = np.linalg.norm(rhs)
    if nb > 0 and np.linalg.norm(A @ x - rhs) > check * nb:
        # one step of iterative refinement before giving up
        x += spla.splu(A).solve(rhs - A @ x)
        rel = np.linalg.norm(A @ x - rhs) / nb
        if rel > check:
            raise SolverError(f"linear solve residual {rel:.2e} exceeds {check:.0e}")
    return x


def newton_solve(space: MorleySpace, nu: float, load: np.ndarray, bd: BoundaryData,
                 config: NewtonConfig | None = None, A: sp.csr_matrix | None = None):
    """Solve nu A_h psi + B_h(psi; psi, .) = F_h with prescribed boundary DOFs.

    The initial guess is psi = 0 on every DOF; the first Newton update also
    moves the boundary DOFs to their data (so it is the Stokes solve when
    F_h and the data are nonzero).  Converged when the Euclidean norm of the
    free residual is at most tol * max(1, |F_h| on free DOFs); the iteration
    count is the number of Newton updates taken.
    """
    config = config or NewtonConfig()
    A = assemble_A(space) if A is None else A
    fr = space.free_dofs
    g = bd.lift(space.n_dofs)
    psi = np.zeros(space.n_dofs)
    scale = max(1.0, float(np.linalg.norm(load[fr])))
    damp = config.damping == "on" or (config.damping == "auto" and nu <= 1e-3)

    def res(p):
        return (nu * (A @ p) + apply_trilinear(space, p, p) - load)[fr]

    report = SolveReport()
    r = res(psi)
    report.residuals.append(float(np.linalg.norm(r)))
    for it in range(1, config.max_iters + 1):
        J = (nu * A + assemble_trilinear_jacobian(space, psi)).tocsr()
        jump = g - psi
        jump[fr] = 0.0
        rhs = -r - (J @ jump)[fr] if np.any(jump) else -r
        try:
            delta = linear_solve(J[fr][:, fr], rhs, check=1e-8)
        except SolverError as exc:
            raise SolverError(f"Newton iteration {it}: {exc}") from exc
        full = jump
        full[fr] = delta
        step = 1.0
        trial = psi + full
        r_new = res(trial)
        if damp and it > 1:
            n0 = np.linalg.norm(r)
            for _ in range(10):
                if np.linalg.norm(r_new) < n0:
                    break
                step *= 0.5
                trial = psi + step * full
                r_new = res(trial)
        psi, r = trial, r_new
        report.iterations = it
        report.residuals.append(float(np.linalg.norm(r)))
        log.debug("newton %d  |R| = %.3e  step %.3g", it, report.residuals[-1], step)
        small_step = (config.criterion == "residual"
                      or step * np.linalg.norm(full) <= config.tol * max(1.0, np.linalg.norm(psi)))
        if report.residuals[-1] <= config.tol * scale and small_step:
            report.converged = True
            break
    if any(b > a for a, b in zip(report.residuals[1:], report.residuals[2:])):
        warnings.warn("Newton residual history is not monotone", RuntimeWarning)
    if not report.converged:
        raise NewtonDivergence(f"Newton did not converge in {config.max_iters} iterations",
                               report.residuals)
    return psi, report


@dataclass
class PressureSolution:
    w: np.ndarray               # full CR vector (zero on the boundary)
    p: np.ndarray               # one value per cell
    multiplier: float


def solve_pressure(cr: CRSpace, space: MorleySpace, psi: np.ndarray, f=None, nu: float = 1.0,
                   pressure_nu: bool = True, degree: int = 6,
                   f_integrals: np.ndarray | None = None) -> PressureSolution:
    system = assemble_pressure_saddle(cr, space, psi, f, nu, pressure_nu, degree, f_integrals)
    try:
        x = linear_solve(system.matrix, system.rhs)
    except SolverError as exc:
        try:
            smin = spla.svds(sp.csc_matrix(system.matrix), k=1, which="SM",
                             return_singular_vectors=False)[0]
        except Exception:  # noqa: BLE001 - diagnostics only
            smin = float("nan")
        raise SolverError(f"pressure saddle system singular (smallest singular value ~{smin:.2e}): {exc}") from exc
    nf = len(cr.free_dofs)
    nc = space.mesh.n_cells
    w = np.zeros(cr.n_dofs)
    w[cr.free_dofs] = x[:nf]
    return PressureSolution(w, x[nf:nf + nc], float(x[-1]))
