"""Configuration-driven command line front end.

Subcommands: generate, homogenize, permeability, react, converge.
Parameters come from a JSON config file (flat per-subcommand sections);
command-line flags override config values.  Exit codes: 0 success,
2 configuration/parameter error, 3 solver or percolation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, cellproblem, ergodic, geometry, io as sio, stokescell
from .errors import (
    ConfigError,
    ContractError,
    ParameterError,
    PercolationError,
    SolverError,
)
from .fields import (
    PhaseField,
    ScalarField,
    coefficient_field,
    specific_surface,
    volume_fraction,
)
from .reactionsim import MacroState, ReactionParams, run as run_reaction

_GEOMETRY_KEYS = {
    "model", "dimension", "L", "m", "intensity", "radius", "hardcore_radius",
    "variant", "per_side", "thickness", "pipe_radius", "fraction", "axis",
    "blocks", "seed",
}

_ALLOWED = {
    "generate": _GEOMETRY_KEYS,
    "homogenize": _GEOMETRY_KEYS | {"d_a", "d_b", "tol"},
    "permeability": _GEOMETRY_KEYS | {"nu", "tol"},
    "react": {
        "family", "k", "k1", "k2", "Umax", "theta", "s", "Dhom", "bc",
        "dt", "T", "stride", "M", "domain", "u0", "U0", "f", "seed",
        "include_porosity", "dimension",
    },
    "converge": {
        "observable", "model", "L_list", "seeds", "m_per_unit",
        "d_a", "d_b", "tol", "seed",
    },
}


def _load_config(args: argparse.Namespace, command: str) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = raw.get(command, raw) if command in raw else raw
        if not isinstance(cfg, dict):
            raise ConfigError(f"section {command!r} must be a JSON object")
    if args.seed is not None:
        cfg["seed"] = args.seed
    unknown = set(cfg) - _ALLOWED[command]
    if unknown:
        raise ConfigError(
            f"unknown config key(s) for {command}: {', '.join(sorted(unknown))}"
        )
    return cfg


def _config_stamp(cfg: dict, seed: int) -> str:
    digest = hashlib.sha256(
        json.dumps(cfg, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]
    return f"# config={digest} seed={seed} version={__version__}"


def build_geometry(cfg: dict) -> PhaseField:
    """Construct the phase field described by a geometry config section."""
    model = cfg.get("model")
    if model is None:
        raise ConfigError("missing config key: model")
    n = int(cfg.get("dimension", 2))
    L = float(cfg.get("L", 1.0))
    m = int(cfg.get("m", 128))
    seed = int(cfg.get("seed", 0))
    try:
        window = geometry.Window(n, L)
        if model in ("boolean", "poisson_balls"):
            pts = geometry.sample_poisson(window, float(cfg["intensity"]), seed)
            return geometry.rasterize_balls(pts, float(cfg["radius"]), m)
        if model == "matern_balls":
            pts = geometry.sample_poisson(window, float(cfg["intensity"]), seed)
            pts = geometry.matern_thin(pts, float(cfg["hardcore_radius"]),
                                       str(cfg.get("variant", "II")))
            return geometry.rasterize_balls(pts, float(cfg["radius"]), m)
        if model == "voronoi_walls":
            pts = geometry.sample_poisson(window, float(cfg["intensity"]), seed)
            if "hardcore_radius" in cfg:
                pts = geometry.matern_thin(pts, float(cfg["hardcore_radius"]),
                                           str(cfg.get("variant", "II")))
            return geometry.rasterize_voronoi_walls(
                pts, m, float(cfg.get("thickness", 1.0)))
        if model == "delaunay_pipes":
            pts = geometry.sample_poisson(window, float(cfg["intensity"]), seed)
            if "hardcore_radius" in cfg:
                pts = geometry.matern_thin(pts, float(cfg["hardcore_radius"]),
                                           str(cfg.get("variant", "II")))
            tess = geometry.voronoi(pts)
            return geometry.rasterize_pipes(pts, geometry.delaunay(tess),
                                            float(cfg["pipe_radius"]), m)
        if model == "grains":
            pts = geometry.sample_poisson(window, float(cfg["intensity"]), seed)
            if "hardcore_radius" in cfg:
                pts = geometry.matern_thin(pts, float(cfg["hardcore_radius"]),
                                           str(cfg.get("variant", "II")))
            tess = geometry.voronoi(pts)
            grains = geometry.build_grains(tess)
            return geometry.rasterize_grains(grains, window, m, seed=seed)
        if model == "lattice_balls":
            return geometry.rasterize_lattice_balls(
                window, int(cfg["per_side"]), float(cfg["radius"]), m)
        if model == "checkerboard":
            return geometry.checkerboard(n, m, L, int(cfg.get("blocks", 2)))
        if model == "layers":
            return geometry.layered(n, m, float(cfg.get("fraction", 0.5)),
                                    int(cfg.get("axis", 0)), L)
    except KeyError as exc:
        raise ConfigError(f"missing config key: {exc.args[0]}")
    raise ConfigError(f"unknown geometry model {model!r}")


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = _load_config(args, "generate")
    pf = build_geometry(cfg)
    seed = int(cfg.get("seed", 0))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sio.write_shpf(pf, out / f"phase_{seed}.shpf")
    theta = volume_fraction(pf)
    s = specific_surface(pf)
    lines = [
        _config_stamp(cfg, seed),
        "seed,theta,s",
        f"{seed},{_fmt(theta)},{_fmt(s)}",
    ]
    (out / "stats.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote phase_{seed}.shpf theta={_fmt(theta)} s={_fmt(s)}")
    return 0


def cmd_homogenize(args: argparse.Namespace) -> int:
    cfg = _load_config(args, "homogenize")
    pf = build_geometry(cfg)
    seed = int(cfg.get("seed", 0))
    d_a = float(cfg.get("d_a", 1.0))
    d_b = float(cfg.get("d_b", 1.0))
    tol = float(cfg.get("tol", 1e-10))
    cf = coefficient_field(pf, d_a, d_b)
    n = pf.grid.n
    correctors = [cellproblem.solve_corrector(cf, j, tol=tol) for j in range(n)]
    tensor = cellproblem.homogenized_tensor(cf, correctors, seed=seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["seed", "m", "L", "D_A", "D_B", "theta"]
    cols += [f"D{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    cols += [f"res{j + 1}" for j in range(n)]
    vals = [str(seed), str(pf.grid.m), _fmt(pf.grid.L), _fmt(d_a), _fmt(d_b),
            _fmt(volume_fraction(pf))]
    vals += [_fmt(tensor.matrix[i, j]) for i in range(n) for j in range(n)]
    vals += [_fmt(r) for r in tensor.residuals]
    lines = [_config_stamp(cfg, seed), ",".join(cols), ",".join(vals)]
    (out / "homogenize.csv").write_text("\n".join(lines) + "\n")
    if args.vtk:
        for c in correctors:
            sio.write_vtk_scalar(c.phi, out / f"phi_{c.direction + 1}.vtk")
    print("D_hom = " + np.array2string(tensor.matrix, precision=6))
    return 0


def cmd_permeability(args: argparse.Namespace) -> int:
    cfg = _load_config(args, "permeability")
    pf = build_geometry(cfg)
    seed = int(cfg.get("seed", 0))
    nu = float(cfg.get("nu", 1.0))
    tol = float(cfg.get("tol", 1e-8))
    tensor = stokescell.permeability(pf, viscosity=nu, tol=tol, seed=seed)
    n = pf.grid.n
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["seed", "m", "L", "nu", "porosity"]
    cols += [f"K{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    cols += ["res_mom", "res_div"]
    vals = [str(seed), str(pf.grid.m), _fmt(pf.grid.L), _fmt(nu),
            _fmt(tensor.porosity)]
    vals += [_fmt(tensor.matrix[i, j]) for i in range(n) for j in range(n)]
    vals += [_fmt(max(r[0] for r in tensor.residuals)),
             _fmt(max(r[1] for r in tensor.residuals))]
    lines = [_config_stamp(cfg, seed), ",".join(cols), ",".join(vals)]
    (out / "permeability.csv").write_text("\n".join(lines) + "\n")
    print("K = " + np.array2string(tensor.matrix, precision=6))
    return 0


def _load_dhom(value, n: int) -> np.ndarray:
    if isinstance(value, str):
        if not value.startswith("from "):
            raise ConfigError("Dhom must be a matrix or 'from <csv path>'")
        path = value[5:].strip()
        try:
            lines = [
                ln for ln in Path(path).read_text().splitlines()
                if ln and not ln.startswith("#")
            ]
            header = lines[0].split(",")
            values = lines[1].split(",")
            row = dict(zip(header, values))
            return np.array([
                [float(row[f"D{i + 1}{j + 1}"]) for j in range(n)]
                for i in range(n)
            ])
        except (OSError, KeyError, IndexError, ValueError) as exc:
            raise ConfigError(f"cannot load Dhom from {path}: {exc}")
    mat = np.asarray(value, dtype=np.float64)
    if mat.shape != (n, n):
        raise ConfigError(f"Dhom must be {n}x{n}")
    return mat


def cmd_react(args: argparse.Namespace) -> int:
    cfg = _load_config(args, "react")
    n = int(cfg.get("dimension", 2))
    M = int(cfg.get("M", 32))
    domain = float(cfg.get("domain", 1.0))
    dhom = _load_dhom(cfg.get("Dhom", np.eye(n).tolist()), n)
    params = ReactionParams(
        family=str(cfg.get("family", "linear")),
        k=float(cfg.get("k", 1.0)),
        k1=float(cfg.get("k1", 1.0)),
        k2=float(cfg.get("k2", 1.0)),
        U_max=float(cfg.get("Umax", 1.0)),
        theta=float(cfg.get("theta", 1.0)),
        s=float(cfg.get("s", 1.0)),
        dhom=dhom,
        f=float(cfg.get("f", 0.0)),
        bc=str(cfg.get("bc", "neumann")),
        include_porosity=bool(cfg.get("include_porosity", True)),
    )
    shape = (M,) * n
    state = MacroState(
        n, M, domain,
        np.full(shape, float(cfg.get("u0", 0.0))),
        np.full(shape, float(cfg.get("U0", 0.0))),
    )
    dt = float(cfg.get("dt", 1e-3))
    T = float(cfg.get("T", 1.0))
    stride = int(cfg.get("stride", 1))
    snaps, ledger = run_reaction(state, params, dt, T, stride=stride)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [_config_stamp(cfg, int(cfg.get("seed", 0))),
             "t,mass_u,mass_U,total_mass,min_u,max_u"]
    for row in ledger:
        lines.append(",".join(_fmt(v) for v in (
            row.t, row.mass_u, row.mass_U, row.total_mass, row.min_u, row.max_u
        )))
    (out / "react.csv").write_text("\n".join(lines) + "\n")
    if args.vtk:
        from .fields import TorusGrid

        grid = TorusGrid(n, max(M, 8), domain)
        final = snaps[-1]
        if M >= 8:
            sio.write_vtk_scalar(ScalarField(grid, final.u, "u0"),
                                 out / "u0_final.vtk")
    print(f"final total mass {_fmt(ledger[-1].total_mass)}")
    return 0


def cmd_converge(args: argparse.Namespace) -> int:
    cfg = _load_config(args, "converge")
    observable = str(cfg.get("observable", "volume_fraction"))
    model = cfg.get("model")
    if not isinstance(model, dict):
        raise ConfigError("converge needs a 'model' object")
    L_list = [float(v) for v in cfg.get("L_list", [1.0, 2.0])]
    seeds = int(cfg.get("seeds", 8))
    m_per_unit = int(cfg.get("m_per_unit", 64))
    if observable == "tensor":
        table = ergodic.tensor_convergence(
            model, L_list, seeds,
            d_a=float(cfg.get("d_a", 1.0)),
            d_b=float(cfg.get("d_b", 0.1)),
            tol=float(cfg.get("tol", 1e-10)),
            m_per_unit=m_per_unit,
        )
    else:
        table = ergodic.empirical_average(observable, model, L_list, seeds,
                                          m_per_unit=m_per_unit)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table.write_csv(out / "converge.csv",
                    preamble=_config_stamp(cfg, int(cfg.get("seed", 0))))
    print(f"wrote {len(table.rows)} rows")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "homogenize": cmd_homogenize,
    "permeability": cmd_permeability,
    "react": cmd_react,
    "converge": cmd_converge,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochom",
        description="random-microstructure homogenization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None,
                       help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", type=str, default=".",
                       help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="internal parallelism (1 keeps runs bitwise reproducible)")
        p.add_argument("--vtk", action="store_true",
                       help="also write VTK field files")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ParameterError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PercolationError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except KeyError as exc:
        print(f"error: missing config key: {exc.args[0]}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
