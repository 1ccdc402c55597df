"""File formats: SHPF phase-field binaries, point CSVs, legacy VTK ASCII."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ContractError
from .fields import PhaseField, ScalarField, TorusGrid, VectorField
from .geometry import PointSet, Window

_SHPF_MAGIC = b"SHPF"
# little-endian: magic, u32 version, u32 n, u32 m, f64 L, u64 seed
_SHPF_HEADER = "<4sIII d Q".replace(" ", "")


def write_shpf(pf: PhaseField, path: str | Path) -> None:
    g = pf.grid
    header = struct.pack(_SHPF_HEADER, _SHPF_MAGIC, 1, g.n, g.m, g.L, pf.seed % 2**64)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(pf.data, dtype=np.uint8).tobytes(order="C"))


def read_shpf(path: str | Path) -> PhaseField:
    size = struct.calcsize(_SHPF_HEADER)
    with open(path, "rb") as fh:
        magic, version, n, m, L, seed = struct.unpack(_SHPF_HEADER, fh.read(size))
        if magic != _SHPF_MAGIC:
            raise ContractError(f"not an SHPF file: bad magic {magic!r}")
        if version != 1:
            raise ContractError(f"unsupported SHPF version {version}")
        raw = fh.read(m**n)
    if len(raw) != m**n:
        raise ContractError(
            f"truncated SHPF payload: expected {m**n} bytes, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype=np.uint8).reshape((m,) * n)
    return PhaseField(TorusGrid(n, m, L), data.copy(), seed=seed)


def write_points_csv(pts: PointSet, path: str | Path) -> None:
    header = "x,y" if pts.window.n == 2 else "x,y,z"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in pts.points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_points_csv(path: str | Path, window: Window) -> PointSet:
    with open(path) as fh:
        header = fh.readline().strip()
        n = len(header.split(","))
        if n != window.n:
            raise ContractError(f"CSV has {n} columns, window is {window.n}D")
        rows = [
            [float(v) for v in line.split(",")] for line in fh if line.strip()
        ]
    pts = np.array(rows, dtype=np.float64).reshape(-1, window.n)
    return PointSet(window, pts)


def _vtk_header(grid: TorusGrid, title: str) -> list[str]:
    m, h = grid.m, grid.h
    dims = f"{m} {m} {m}" if grid.n == 3 else f"{m} {m} 1"
    spac = f"{h:.12g} {h:.12g} {h:.12g}" if grid.n == 3 else f"{h:.12g} {h:.12g} 1"
    return [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {dims}",
        "ORIGIN 0 0 0",
        f"SPACING {spac}",
        f"POINT_DATA {grid.ncells}",
    ]


def write_vtk_scalar(field: ScalarField, path: str | Path, title: str = "stochom") -> None:
    lines = _vtk_header(field.grid, title)
    lines.append(f"SCALARS {field.name} double 1")
    lines.append("LOOKUP_TABLE default")
    # VTK x-fastest ordering: transpose the row-major array
    flat = field.values.T.ravel(order="C")
    lines.extend(f"{v:.12g}" for v in flat)
    Path(path).write_text("\n".join(lines) + "\n")


def write_vtk_vector(field: VectorField, path: str | Path, title: str = "stochom") -> None:
    g = field.grid
    lines = _vtk_header(g, title)
    lines.append(f"VECTORS {field.name} double")
    comps = np.moveaxis(field.values, -1, 0)
    flat = [c.T.ravel(order="C") for c in comps]
    if g.n == 2:
        flat.append(np.zeros(g.ncells))
    for vx, vy, vz in zip(*flat):
        lines.append(f"{vx:.12g} {vy:.12g} {vz:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")
