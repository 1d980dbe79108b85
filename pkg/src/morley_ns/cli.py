"""Command line entry point: ``morley-ns run ...`` and ``morley-ns mesh gen ...``."""
from __future__ import annotations

import argparse
import logging
import sys

from .cases import BenchmarkConfig, ConfigError, make_mesh, run
from .mesh import save_mesh, shape_diagnostics


def _levels(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _nus(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morley-ns", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a benchmark refinement study")
    r.add_argument("--config", help="key=value configuration file")
    r.add_argument("--test", choices=["kovasznay", "lshaped", "cavity", "robustness"])
    r.add_argument("--family", choices=["square", "tri", "trap", "cvt"])
    r.add_argument("--levels", type=_levels, help="comma separated n values, e.g. 4,8,16")
    r.add_argument("--nu", type=_nus, help="viscosity, or a comma separated list")
    r.add_argument("--load-variant", dest="load_variant", choices=["standard", "rotational"])
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory")

    m = sub.add_parser("mesh", help="mesh utilities")
    msub = m.add_subparsers(dest="mesh_command", required=True)
    g = msub.add_parser("gen", help="generate a mesh file")
    g.add_argument("--family", required=True, choices=["square", "tri", "trap", "cvt"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--domain", default="unit", choices=["unit", "lshape"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--lloyd-iters", dest="lloyd_iters", type=int, default=100)
    g.add_argument("--diagonal", default="left", choices=["left", "right"])
    g.add_argument("-o", "--output", required=True)
    return ap


def _run(args) -> int:
    overrides = {k: getattr(args, k) for k in ("test", "family", "levels", "nu", "load_variant",
                                                "seed", "out")}
    if args.config:
        cfg = BenchmarkConfig.from_file(args.config, **overrides)
    else:
        if args.test is None:
            raise ConfigError("either --config or --test is required")
        defaults = {"family": "tri"} if args.test == "lshaped" else {}
        kw = {**defaults, **{k: v for k, v in overrides.items() if v is not None}}
        cfg = BenchmarkConfig(**kw)
    result = run(cfg)
    if cfg.test == "cavity":
        for nu, summaries in result.items():
            for s in summaries:
                print(f"nu={nu:g}: {s.iterations} Newton steps, psi_min={s.psi_min:.5f} "
                      f"at ({s.psi_min_location[0]:.3f}, {s.psi_min_location[1]:.3f})")
    else:
        for nu, rows in result.items():
            for row in rows:
                if "failed" in row:
                    print(f"nu={nu:g} h={row['h']:.5f}: FAILED {row['failed']}")
                else:
                    print(f"nu={nu:g} h={row['h']:.5f} E2_psi={row['E2_psi']:.4e} "
                          f"E0_p={row['E0_p']:.4e} newton={row['newton_iters']}")
    print(f"results written to {cfg.out}/")
    return 0


def _mesh_gen(args) -> int:
    mesh = make_mesh(args.family, args.n, args.domain, args.seed, args.lloyd_iters, args.diagonal)
    save_mesh(mesh, args.output)
    d = shape_diagnostics(mesh)
    print(f"{mesh.n_vertices} vertices, {mesh.n_edges} edges, {mesh.n_cells} cells, "
          f"h={mesh.h:.4f}, min rho_star={d[:, 0].min():.3f}, min rho_edge={d[:, 1].min():.3f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _run(args)
        return _mesh_gen(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"morley-ns: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
