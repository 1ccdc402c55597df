"""Empirical checks of ergodic averaging: window averages of geometric and
homogenized observables converge to ensemble values as the window grows,
and their seed-to-seed variance shrinks.

The window side L plays the role of the inverse scale parameter: the
microstructure (intensity, radii) is held fixed while L grows, which is
equivalent to shrinking the pore scale at a fixed window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cellproblem, geometry
from .errors import ParameterError, PercolationError, SolverError
from .fields import PhaseField, coefficient_field, specific_surface, volume_fraction


@dataclass
class TableRow:
    observable: str
    L: float
    m: int
    seeds: int
    mean: float
    variance: float
    reference: float | None = None
    flag: str = ""


@dataclass
class ConvergenceTable:
    rows: list[TableRow] = field(default_factory=list)

    def add(self, row: TableRow) -> None:
        if row.seeds < 2 and row.variance != 0.0:
            raise ParameterError("variance rows need at least 2 seeds")
        self.rows.append(row)

    def by(self, observable: str) -> list[TableRow]:
        return [r for r in self.rows if r.observable == observable]

    def write_csv(self, path: str | Path, preamble: str = "") -> None:
        lines = []
        if preamble:
            lines.append(preamble)
        lines.append("observable,L,m,seeds,mean,variance,reference,flag")
        for r in self.rows:
            ref = f"{r.reference:.12g}" if r.reference is not None else ""
            lines.append(
                f"{r.observable},{r.L:.12g},{r.m},{r.seeds},"
                f"{r.mean:.12g},{r.variance:.12g},{ref},{r.flag}"
            )
        Path(path).write_text("\n".join(lines) + "\n")


def build_model(model: dict, L: float, m: int, seed: int) -> PhaseField:
    """Instantiate a geometry model config on a window of side L."""
    kind = model.get("type")
    window = geometry.Window(int(model.get("dimension", 2)), L)
    if kind == "boolean":
        pts = geometry.sample_poisson(window, model["intensity"], seed)
        return geometry.rasterize_balls(pts, model["radius"], m)
    if kind == "matern":
        pts = geometry.sample_poisson(window, model["intensity"], seed)
        pts = geometry.matern_thin(pts, model["hardcore_radius"],
                                   model.get("variant", "II"))
        return geometry.rasterize_balls(pts, model["radius"], m)
    if kind == "lattice":
        per_side = int(model["per_side"] * L / model.get("base_L", 1.0))
        return geometry.rasterize_lattice_balls(window, per_side,
                                                model["radius"], m)
    raise ParameterError(f"unknown model type {model.get('type')!r}")


def boolean_reference(observable: str, model: dict) -> float | None:
    """Closed-form ensemble values for the Boolean disk model (2D)."""
    if model.get("type") != "boolean" or model.get("dimension", 2) != 2:
        return None
    lam, r = model["intensity"], model["radius"]
    covered = 1.0 - np.exp(-lam * np.pi * r * r)
    if observable == "volume_fraction":
        return float(covered)
    if observable == "specific_surface":
        return float(2.0 * np.pi * lam * r * np.exp(-lam * np.pi * r * r))
    return None


_OBSERVABLES = {
    "volume_fraction": volume_fraction,
    "specific_surface": specific_surface,
}


def empirical_average(
    observable: str,
    model: dict,
    L_list: list[float],
    seeds: int,
    m_per_unit: int = 64,
) -> ConvergenceTable:
    """Mean/variance of a geometric observable over seeds, per window size."""
    if observable not in _OBSERVABLES:
        raise ParameterError(f"unknown observable {observable!r}")
    if len(L_list) < 2:
        raise ParameterError("need at least two window sizes")
    if seeds < 2:
        raise ParameterError("need at least two seeds")
    fn = _OBSERVABLES[observable]
    table = ConvergenceTable()
    ref = boolean_reference(observable, model)
    for L in sorted(L_list):
        m = int(round(m_per_unit * L))
        vals = np.array([
            fn(build_model(model, L, m, seed)) for seed in range(seeds)
        ])
        table.add(TableRow(observable, L, m, seeds, float(vals.mean()),
                           float(vals.var(ddof=1)), reference=ref))
    return table


def tensor_convergence(
    model: dict,
    L_list: list[float],
    seeds: int,
    d_a: float = 1.0,
    d_b: float = 0.1,
    tol: float = 1e-10,
    m_per_unit: int = 64,
) -> ConvergenceTable:
    """Mean/variance of homogenized-tensor entries over seeds per window size.

    Percolation/solver failures are counted in the row flag rather than
    aborting the sweep.
    """
    table = ConvergenceTable()
    n = int(model.get("dimension", 2))
    for L in sorted(L_list):
        m = int(round(m_per_unit * L))
        entries: list[np.ndarray] = []
        failures = 0
        for seed in range(seeds):
            pf = build_model(model, L, m, seed)
            cf = coefficient_field(pf, d_a, d_b)
            try:
                corr = [
                    cellproblem.solve_corrector(cf, j, tol=tol)
                    for j in range(n)
                ]
                entries.append(
                    cellproblem.homogenized_tensor(cf, corr, seed=seed).matrix
                )
            except (PercolationError, SolverError):
                failures += 1
        flag = f"failed={failures}" if failures else ""
        stack = np.array(entries)
        for i in range(n):
            for j in range(n):
                vals = stack[:, i, j]
                table.add(TableRow(
                    f"Dhom{i + 1}{j + 1}", L, m, len(entries),
                    float(vals.mean()),
                    float(vals.var(ddof=1)) if len(vals) > 1 else 0.0,
                    flag=flag,
                ))
    return table


def variance_ratio(table: ConvergenceTable, observable: str) -> float:
    """Var at the largest window over Var at the smallest."""
    rows = sorted(table.by(observable), key=lambda r: r.L)
    if len(rows) < 2:
        raise ParameterError("need rows at two window sizes")
    if rows[0].variance == 0.0:
        return 0.0 if rows[-1].variance == 0.0 else np.inf
    return rows[-1].variance / rows[0].variance


def window_spread(pf: PhaseField, block_cells: int) -> float:
    """Max - min of the volume fraction over all aligned sub-windows.

    Sub-windows of block_cells per side are taken at every offset that
    tiles the raster (non-overlapping); the spread shrinking with block
    size is the shift-coupled ergodicity check.
    """
    m = pf.grid.m
    if m % block_cells != 0:
        raise ParameterError("block_cells must divide the raster size")
    k = m // block_cells
    a = pf.data.astype(np.float64)
    if pf.grid.n == 2:
        blocks = a.reshape(k, block_cells, k, block_cells).mean(axis=(1, 3))
    else:
        blocks = a.reshape(k, block_cells, k, block_cells, k,
                           block_cells).mean(axis=(1, 3, 5))
    return float(blocks.max() - blocks.min())
