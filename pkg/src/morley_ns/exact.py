"""Closed-form solution bundles for the benchmark problems.

Each bundle is generated symbolically from a stream function psi, a
pressure p and a viscosity nu: u = curl psi = (psi_y, -psi_x),
omega = -Lap psi and f = -nu Lap u + (grad u) u + grad p.  Every callable
takes an (n, 2) array of points.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sym

X, Y = sym.symbols("x y", real=True)

# theta = offset + sense * phi, phi the polar angle taken in [0, 3pi/2] on the
# L-shaped domain (the branch cut runs along the removed quadrant)
THETA_CONVENTIONS = {
    "from-y-clockwise": (np.pi / 2, -1.0),        # theta = atan2(x, y)
    "from-negy-clockwise": (1.5 * np.pi, -1.0),
    "from-negy-counterclockwise": (np.pi / 2, 1.0),
    "from-y-counterclockwise": (-np.pi / 2, 1.0),
    "from-x": (0.0, 1.0),
}


def _branch_atan2(y, x):
    phi = np.arctan2(y, x)
    return np.where(phi < -0.5 * np.pi + 1e-12, phi + 2 * np.pi, phi)


@dataclass
class ExactSolution:
    name: str
    nu: float
    psi: Callable
    grad_psi: Callable
    hess_psi: Callable
    u: Callable
    grad_u: Callable
    omega: Callable
    p: Callable
    f: Callable
    rot_f: Callable
    p_shift: float = 0.0   # constant subtracted from the closed-form pressure

    def with_pressure_shift(self, shift: float) -> "ExactSolution":
        base = self.p
        out = ExactSolution(**{**self.__dict__})
        out.p = lambda pts: base(pts) - shift
        out.p_shift = self.p_shift + shift
        return out


def _compile(expr, shape=()):
    """Vectorized callable pts -> array of shape (n,) + shape."""
    flat = list(np.ravel(np.array(expr, dtype=object))) if shape else [expr]
    fn = sym.lambdify((X, Y), flat, modules=[{"atan2": _branch_atan2}, "numpy"], cse=True)

    def call(pts):
        pts = np.asarray(pts, dtype=float)
        lead = pts.shape[:-1]
        x, y = pts[..., 0].ravel(), pts[..., 1].ravel()
        vals = [np.broadcast_to(np.asarray(v, dtype=float), x.shape) for v in fn(x, y)]
        out = np.stack(vals, axis=-1).reshape(lead + tuple(shape) if shape else lead)
        return out

    return call


def build_solution(name: str, psi, p, nu: float) -> ExactSolution:
    grad = [sym.diff(psi, X), sym.diff(psi, Y)]
    hess = [[sym.diff(psi, a, b) for b in (X, Y)] for a in (X, Y)]
    u = [grad[1], -grad[0]]
    gu = [[sym.diff(ui, X), sym.diff(ui, Y)] for ui in u]
    omega = -(hess[0][0] + hess[1][1])
    lap_u = [sym.diff(ui, X, 2) + sym.diff(ui, Y, 2) for ui in u]
    f = [-nu * lap_u[i] + gu[i][0] * u[0] + gu[i][1] * u[1] + sym.diff(p, (X, Y)[i])
         for i in range(2)]
    rot_f = sym.diff(f[1], X) - sym.diff(f[0], Y)
    return ExactSolution(
        name=name, nu=nu,
        psi=_compile(psi), grad_psi=_compile(grad, (2,)), hess_psi=_compile(hess, (2, 2)),
        u=_compile(u, (2,)), grad_u=_compile(gu, (2, 2)), omega=_compile(omega),
        p=_compile(p), f=_compile(f, (2,)), rot_f=_compile(rot_f),
    )


def kovasznay(nu: float) -> ExactSolution:
    re = 1.0 / nu
    lam = re / 2 - np.sqrt(re**2 / 4 + 4 * np.pi**2)
    L = sym.Float(lam, 17)
    pbar = (np.exp(2 * lam) - 1) / (4 * lam)
    psi = Y - sym.exp(L * X) * sym.sin(2 * sym.pi * Y) / (2 * sym.pi)
    p = -sym.exp(2 * L * X) / 2 + sym.Float(pbar, 17)
    return build_solution("kovasznay", psi, p, nu)


def lshaped(nu: float = 1.0, theta: str = "from-negy-clockwise") -> ExactSolution:
    off, sense = THETA_CONVENTIONS[theta]
    r = sym.sqrt(X**2 + Y**2)
    th = sym.Float(off, 17) + sym.Float(sense) * sym.atan2(Y, X)
    psi = r ** sym.Rational(5, 3) * sym.sin(sym.Rational(5, 3) * th)
    pbar = -2 * (1 - sym.cos(1)) / 3
    p = sym.sin(X) - sym.sin(Y) - pbar
    return build_solution("lshaped", psi, p, nu)


def robustness(nu: float) -> ExactSolution:
    psi = X**2 * Y**2 * (1 - X) ** 2 * (1 - Y) ** 2
    p = X**3 * Y**3 - sym.Rational(1, 6)
    return build_solution("robustness", psi, p, nu)


def quadratic(coeffs=(0.3, -0.2, 0.5, 1.0, -0.7, 0.4), nu: float = 1.0) -> ExactSolution:
    """Global quadratic stream function a0 + a1 x + a2 y + a3 x^2 + a4 xy + a5 y^2, p = 0."""
    a = [sym.nsimplify(c) for c in coeffs]
    psi = a[0] + a[1] * X + a[2] * Y + a[3] * X**2 + a[4] * X * Y + a[5] * Y**2
    return build_solution("quadratic", psi, sym.Integer(0), nu)
