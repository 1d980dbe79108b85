"""Benchmark configurations and refinement-study drivers."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import exact as exact_mod
from .assembly import assemble_A, assemble_load, build_boundary_data, cell_force_integrals
from .crouzeix_raviart import CRSpace
from .mesh import (PolygonalMesh, generate_square_mesh, generate_trapezoid_mesh,
                   generate_triangle_mesh, generate_voronoi_mesh)
from .morley import MorleySpace
from .postprocess import (error_norms, sample_fields, write_csv,
                          write_fields_csv)
from .quadrature import MeshQuadrature
from .solver import NewtonConfig, NewtonDivergence, SolverError, newton_solve, solve_pressure

log = logging.getLogger(__name__)

TESTS = ("kovasznay", "lshaped", "cavity", "robustness")
FAMILIES = ("square", "tri", "trap", "cvt")


class ConfigError(ValueError):
    pass


def _onoff(v: str) -> bool:
    v = v.strip().lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"expected on/off, got {v!r}")


def _floats(v: str) -> list[float]:
    return [float(x) for x in v.replace(";", ",").split(",") if x.strip()]


def _ints(v: str) -> list[int]:
    return [int(x) for x in v.replace(";", ",").split(",") if x.strip()]


@dataclass
class BenchmarkConfig:
    test: str = "kovasznay"
    family: str = "square"
    levels: list = field(default_factory=lambda: [4, 8, 16, 32, 64])
    nu: list = field(default_factory=lambda: [1.0])
    load_variant: str = "standard"
    stab_scaling: str = "paper"
    pressure_nu: bool = True
    quad_load: int = 6
    quad_error: int = 8
    newton_tol: float = 1e-8
    newton_max_iters: int = 50
    newton_damping: str = "auto"
    newton_criterion: str = "residual"
    seed: int = 0
    lloyd_iters: int = 100
    theta: str = "from-negy-clockwise"
    diagonal: str = "left"
    out: str = "results"
    fields: bool = True
    pressure: bool = True

    _KEYS = {
        "test": ("test", str), "family": ("family", str), "levels": ("levels", _ints),
        "nu": ("nu", _floats), "load_variant": ("load_variant", str),
        "stab_scaling": ("stab_scaling", str), "pressure_nu": ("pressure_nu", _onoff),
        "quadrature.load": ("quad_load", int), "quadrature.error": ("quad_error", int),
        "newton.tol": ("newton_tol", float), "newton.max_iters": ("newton_max_iters", int),
        "newton.damping": ("newton_damping", str),
        "newton.criterion": ("newton_criterion", str), "seed": ("seed", int),
        "lloyd_iters": ("lloyd_iters", int), "theta": ("theta", str),
        "diagonal": ("diagonal", str), "out": ("out", str), "fields": ("fields", _onoff),
        "pressure": ("pressure", _onoff),
    }

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.test not in TESTS:
            raise ConfigError(f"test must be one of {TESTS}")
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}")
        if not self.levels or any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigError("levels must be strictly increasing")
        if any(n < 1 for n in self.levels):
            raise ConfigError("levels must be positive")
        if not self.nu or any(v <= 0 for v in self.nu):
            raise ConfigError("viscosities must be positive")
        if self.load_variant not in ("standard", "rotational"):
            raise ConfigError("load_variant must be standard or rotational")
        if self.stab_scaling not in ("paper", "homogenized"):
            raise ConfigError("stab_scaling must be paper or homogenized")
        if self.newton_damping not in ("auto", "on", "off"):
            raise ConfigError("newton.damping must be auto, on or off")
        if self.newton_criterion not in ("residual", "increment"):
            raise ConfigError("newton.criterion must be residual or increment")
        if self.test == "lshaped" and self.family != "tri":
            raise ConfigError("the L-shaped test runs on the triangular family")

    @classmethod
    def from_text(cls, text: str, **overrides) -> "BenchmarkConfig":
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in cls._KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            name, conv = cls._KEYS[key]
            try:
                kw[name] = conv(val)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    @classmethod
    def from_file(cls, path, **overrides) -> "BenchmarkConfig":
        return cls.from_text(Path(path).read_text(), **overrides)

    def to_text(self) -> str:
        inv = {name: key for key, (name, _) in self._KEYS.items()}
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "on" if v else "off"
            elif isinstance(v, list):
                v = ",".join(str(x) for x in v)
            out.append(f"{inv[f.name]} = {v}")
        return "\n".join(out) + "\n"

    def newton(self) -> NewtonConfig:
        return NewtonConfig(self.newton_tol, self.newton_max_iters, self.newton_damping,
                            self.newton_criterion)

    def load_degree(self) -> int:
        # the r^(5/3) corner data needs more points than smooth data
        return max(self.quad_load, 10) if self.test == "lshaped" else self.quad_load

    def error_degree(self) -> int:
        return max(self.quad_error, 10) if self.test == "lshaped" else self.quad_error


def make_mesh(family: str, n: int, domain: str = "unit", seed: int = 0,
              lloyd_iters: int = 100, diagonal: str = "left") -> PolygonalMesh:
    """Mesh of nominal size 1/n ('lshape' uses n divisions of [-1, 1])."""
    if domain not in ("unit", "lshape"):
        raise ConfigError("domain must be unit or lshape")
    if domain == "lshape":
        if family != "tri":
            raise ConfigError("the L-shaped domain is only meshed by the tri family")
        return generate_triangle_mesh(n, domain="l-shaped", diagonal=diagonal)
    if family == "square":
        return generate_square_mesh(n)
    if family == "tri":
        return generate_triangle_mesh(n, diagonal=diagonal)
    if family == "trap":
        return generate_trapezoid_mesh(n)
    if family == "cvt":
        return generate_voronoi_mesh(n * n, lloyd_iters=lloyd_iters, rng_seed=seed)
    raise ConfigError(f"unknown family {family!r}")


@dataclass
class LevelResult:
    n: int
    mesh: PolygonalMesh
    space: MorleySpace
    psi: np.ndarray
    p: np.ndarray | None
    iterations: int
    residuals: list
    errors: dict
    seconds: float


def solve_level(cfg: BenchmarkConfig, n: int, nu: float, exact=None,
                boundary: str = "exact", mesh: PolygonalMesh | None = None) -> LevelResult:
    """Build, solve, recover and (with an exact bundle) measure one refinement level."""
    t0 = time.perf_counter()
    domain = "lshape" if cfg.test == "lshaped" else "unit"
    mesh = make_mesh(cfg.family, n, domain, cfg.seed, cfg.lloyd_iters, cfg.diagonal) if mesh is None else mesh
    V = MorleySpace(mesh, cfg.stab_scaling)
    quad = MeshQuadrature.build(mesh, cfg.load_degree())
    if exact is None:
        F = np.zeros(V.n_dofs)
        f = None
    elif cfg.load_variant == "rotational":
        F = assemble_load(V, variant="rotational", rot_f=exact.rot_f, quad=quad)
        f = exact.f
    else:
        F = assemble_load(V, exact.f, quad=quad)
        f = exact.f
    if boundary == "exact":
        bd = build_boundary_data(V, "exact", exact.psi, exact.grad_psi)
    else:
        bd = build_boundary_data(V, boundary)
    psi, rep = newton_solve(V, nu, F, bd, cfg.newton(), A=assemble_A(V))
    p = None
    if cfg.pressure:
        fint = cell_force_integrals(mesh, f, quad=quad)
        p = solve_pressure(CRSpace(mesh), V, psi, nu=nu, pressure_nu=cfg.pressure_nu,
                           f_integrals=fint).p
    errors = {}
    if exact is not None:
        errors = error_norms(V, psi, exact, p, degree=cfg.error_degree())
    errors["h"] = 1.0 / n
    errors["newton_iters"] = rep.iterations
    return LevelResult(n, mesh, V, psi, p, rep.iterations, rep.residuals, errors,
                       time.perf_counter() - t0)


def _exact_for(cfg: BenchmarkConfig, nu: float):
    if cfg.test == "kovasznay":
        return exact_mod.kovasznay(nu)
    if cfg.test == "lshaped":
        return exact_mod.lshaped(nu, cfg.theta)
    if cfg.test == "robustness":
        return exact_mod.robustness(nu)
    return None


def _tag(nu: float) -> str:
    return f"{nu:g}".replace(".", "p")


def run_study(cfg: BenchmarkConfig, nu: float, write: bool = True,
              boundary: str = "exact") -> tuple[list[dict], list[LevelResult]]:
    ex = _exact_for(cfg, nu)
    rows, results = [], []
    out = Path(cfg.out)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    for n in cfg.levels:
        try:
            res = solve_level(cfg, n, nu, ex, boundary)
        except (NewtonDivergence, SolverError) as exc:
            log.error("level n=%d failed: %s", n, exc)
            rows.append({"h": 1.0 / n, "newton_iters": None, "failed": str(exc)})
            continue
        log.info("%s %s nu=%g n=%d: %d Newton steps, %.1fs", cfg.test, cfg.family, nu, n,
                 res.iterations, res.seconds)
        rows.append(res.errors)
        results.append(res)
        if write and cfg.fields:
            samples = sample_fields(res.space, res.psi, res.p)
            write_fields_csv(out / f"fields_{cfg.test}_{cfg.family}_nu{_tag(nu)}_n{n}.csv", samples)
    if write:
        write_csv(out / f"{cfg.test}_{cfg.family}_nu{_tag(nu)}.csv", rows,
                  comment=f"test={cfg.test} family={cfg.family} nu={nu:g} "
                          f"load={cfg.load_variant} stab={cfg.stab_scaling}")
    return rows, results


def run_kovasznay(cfg: BenchmarkConfig, write: bool = True):
    return {nu: run_study(cfg, nu, write)[0] for nu in cfg.nu}


def run_lshaped(cfg: BenchmarkConfig, write: bool = True):
    return {nu: run_study(cfg, nu, write)[0] for nu in cfg.nu}


def run_robustness(cfg: BenchmarkConfig, write: bool = True):
    cfg = replace(cfg, load_variant="rotational")
    return {nu: run_study(cfg, nu, write)[0] for nu in cfg.nu}


@dataclass
class CavitySummary:
    nu: float
    iterations: int
    psi_min: float
    psi_min_location: tuple
    psi_max: float


def cavity_summary(res: LevelResult, nu: float, grid: int = 101) -> CavitySummary:
    s = sample_fields(res.space, res.psi, None, n=grid)
    ok = np.isfinite(s[:, 2])
    k = np.argmin(np.where(ok, s[:, 2], np.inf))
    return CavitySummary(nu, res.iterations, float(s[k, 2]), (float(s[k, 0]), float(s[k, 1])),
                         float(np.nanmax(s[:, 2])))


def run_cavity(cfg: BenchmarkConfig, write: bool = True):
    out = {}
    for nu in cfg.nu:
        _, results = run_study(cfg, nu, write, boundary="lid")
        out[nu] = [cavity_summary(r, nu) for r in results]
    return out


RUNNERS = {"kovasznay": run_kovasznay, "lshaped": run_lshaped, "cavity": run_cavity,
           "robustness": run_robustness}


def run(cfg: BenchmarkConfig, write: bool = True):
    return RUNNERS[cfg.test](cfg, write)


def slope(rows: list[dict], key: str, last: int = 3) -> float:
    pts = [(r["h"], r[key]) for r in rows if r.get(key) and math.isfinite(r[key])][-last:]
    h, e = zip(*pts)
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])
