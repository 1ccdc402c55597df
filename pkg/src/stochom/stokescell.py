"""Stokes cell problems on the pore phase and the Darcy permeability tensor.

MAC staggered grid on the torus: velocity component d lives on faces
normal to d, pressure at cell centers.  A unit body force e_i drives the
flow in the fluid phase; no-slip is enforced by constraining every face
adjacent to a solid cell to zero (normal direction) and by ghost
reflection across solid boundaries (tangential direction).  The
discrete saddle-point system is solved directly by sparse LU, which
meets the same residual contract as the iterative pressure-Schur
alternative and keeps results deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cellproblem import _torus_labels, percolates
from .errors import ParameterError, PercolationError, SolverError
from .fields import PhaseField, TorusGrid


@dataclass
class StokesCorrector:
    direction: int
    velocity: list[np.ndarray]  # component d on faces (c, c+e_d), zeros on walls
    pressure: np.ndarray  # zero-mean over fluid cells, zero on solid
    viscosity: float
    momentum_residual: float
    divergence_residual: float
    grid: TorusGrid = field(repr=False, default=None)


@dataclass
class PermeabilityTensor:
    matrix: np.ndarray
    m: int
    L: float
    seed: int = 0
    viscosity: float = 1.0
    porosity: float = 1.0
    energy_matrix: np.ndarray | None = None
    residuals: tuple[tuple[float, float], ...] = ()


class _StokesSystem:
    """Assembled MAC saddle-point system for one phase field."""

    def __init__(self, pf: PhaseField, viscosity: float):
        g = pf.grid
        n, m, h = g.n, g.m, g.h
        fluid = pf.data == 0
        solid_count = g.ncells - np.count_nonzero(fluid)
        if solid_count == 0:
            raise SolverError(
                "no solid phase: forced steady flow on the torus is unbounded"
            )
        self.grid = g
        self.viscosity = viscosity
        self.fluid = fluid

        self.face_active = [fluid & np.roll(fluid, -1, axis=d) for d in range(n)]
        self.n_faces = [int(np.count_nonzero(fa)) for fa in self.face_active]
        self.face_id = []
        offset = 0
        for d in range(n):
            ids = -np.ones(g.shape, dtype=np.int64)
            ids[self.face_active[d]] = offset + np.arange(self.n_faces[d])
            self.face_id.append(ids)
            offset += self.n_faces[d]
        self.nu_total = offset
        self.cell_id = -np.ones(g.shape, dtype=np.int64)
        self.n_cells = int(np.count_nonzero(fluid))
        self.cell_id[fluid] = np.arange(self.n_cells)

        rows, cols, vals = [], [], []
        visc = viscosity / h**2

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        # momentum block (vectorized per direction pair)
        for d in range(n):
            fa = self.face_active[d]
            rid = self.face_id[d][fa]
            diag = np.zeros(self.n_faces[d])
            for dp in range(n):
                for step in (-1, 1):
                    nb = np.roll(self.face_id[d], -step, axis=dp)[fa]
                    present = nb >= 0
                    diag += visc
                    add(rid[present], nb[present], np.full(present.sum(), -visc))
                    if dp != d:
                        # ghost reflection: wall halfway to the missing face
                        missing = ~present
                        add(rid[missing], rid[missing],
                            np.full(missing.sum(), visc))
            add(rid, rid, diag)
            # pressure gradient (p[c + e_d] - p[c]) / h
            p_hi = np.roll(self.cell_id, -1, axis=d)[fa]
            p_lo = self.cell_id[fa]
            col = self.nu_total
            add(rid, col + p_hi, np.full(len(rid), 1.0 / h))
            add(rid, col + p_lo, np.full(len(rid), -1.0 / h))

        # continuity block: G^T u = 0 (rows symmetric to the gradient)
        for d in range(n):
            fa = self.face_active[d]
            rid = self.face_id[d][fa]
            p_hi = np.roll(self.cell_id, -1, axis=d)[fa]
            p_lo = self.cell_id[fa]
            add(self.nu_total + p_hi, rid, np.full(len(rid), 1.0 / h))
            add(self.nu_total + p_lo, rid, np.full(len(rid), -1.0 / h))

        ntot = self.nu_total + self.n_cells
        rows = np.concatenate([np.atleast_1d(r) for r in rows])
        cols = np.concatenate([np.atleast_1d(c) for c in cols])
        vals = np.concatenate([np.atleast_1d(v) for v in vals])
        M = sp.coo_matrix((vals, (rows, cols)), shape=(ntot, ntot)).tocsr()

        # pin one pressure per fluid component (the dropped continuity row
        # is implied by the others on the torus)
        labels = _torus_labels(fluid)
        self.pinned = []
        flat_labels = labels.ravel()
        flat_cells = self.cell_id.ravel()
        for lab in np.unique(flat_labels[flat_labels > 0]):
            cell = int(flat_cells[np.argmax(flat_labels == lab)])
            self.pinned.append(self.nu_total + cell)
        M = M.tolil()
        for row in self.pinned:
            M.rows[row] = [row]
            M.data[row] = [1.0]
        self.matrix = M.tocsc()
        self.lu = spla.splu(self.matrix)

        # velocity Dirichlet-form block for energy cross-checks
        self.A = self.matrix[: self.nu_total, : self.nu_total].tocsr()

    def rhs(self, direction: int) -> np.ndarray:
        b = np.zeros(self.nu_total + self.n_cells)
        fa = self.face_active[direction]
        b[self.face_id[direction][fa]] = 1.0
        return b

    def solve(self, direction: int) -> StokesCorrector:
        g = self.grid
        b = self.rhs(direction)
        x = self.lu.solve(b)
        u = x[: self.nu_total]
        p = x[self.nu_total:]

        # residuals against the unpinned equations
        mom = self.matrix[: self.nu_total] @ x - b[: self.nu_total]
        mom_res = float(np.linalg.norm(mom)) / float(np.linalg.norm(b))
        div = np.zeros(g.shape)
        scale = max(float(np.max(np.abs(u))), 1.0) if len(u) else 1.0
        vel = []
        for d in range(g.n):
            full = np.zeros(g.shape)
            fa = self.face_active[d]
            full[fa] = u[self.face_id[d][fa]]
            vel.append(full)
            div += (full - np.roll(full, 1, axis=d)) / g.h
        div[~self.fluid] = 0.0
        div_res = float(np.max(np.abs(div))) / scale

        pressure = np.zeros(g.shape)
        pressure[self.fluid] = p
        pressure[self.fluid] -= pressure[self.fluid].mean()
        return StokesCorrector(direction, vel, pressure, self.viscosity,
                               mom_res, div_res, grid=g)

    def energy(self, ci: StokesCorrector, cj: StokesCorrector) -> float:
        """Viscous Dirichlet form <nu grad u_i : grad u_j> (window average)."""
        def pack(c):
            v = np.zeros(self.nu_total)
            for d in range(self.grid.n):
                fa = self.face_active[d]
                v[self.face_id[d][fa]] = c.velocity[d][fa]
            return v

        ui, uj = pack(ci), pack(cj)
        return float(uj @ (self.A @ ui)) / self.grid.ncells


def solve_stokes_corrector(
    pf: PhaseField,
    viscosity: float,
    direction: int,
    tol: float = 1e-8,
) -> StokesCorrector:
    """Stokes corrector driven by a unit body force e_direction."""
    system = _build_checked(pf, viscosity, [direction], tol)
    return system.solve(direction)


def _build_checked(pf, viscosity, directions, tol) -> _StokesSystem:
    if viscosity <= 0:
        raise ParameterError(f"viscosity must be > 0, got {viscosity}")
    if not 0 < tol < 1:
        raise ParameterError("tol must lie in (0, 1)")
    fluid = pf.data == 0
    if not np.any(fluid):
        raise PercolationError("all-solid phase field: no fluid to flow")
    for d in directions:
        if not 0 <= d < pf.grid.n:
            raise ParameterError(f"direction must be in 0..{pf.grid.n - 1}")
        if not percolates(fluid, d):
            raise PercolationError(
                f"fluid phase does not percolate in direction {d}"
            )
    system = _StokesSystem(pf, viscosity)
    return system


def percolating_directions(pf: PhaseField) -> list[int]:
    fluid = pf.data == 0
    return [d for d in range(pf.grid.n) if percolates(fluid, d)]


def permeability(
    pf: PhaseField,
    viscosity: float = 1.0,
    tol: float = 1e-8,
    seed: int = 0,
) -> PermeabilityTensor:
    """Darcy tensor K[i, j] = window average of the j-velocity under force e_i.

    The fluid phase must percolate in at least one direction; blocked
    directions remain solvable (the pressure absorbs the body force
    across the obstruction) and contribute zero columns.
    """
    g = pf.grid
    if not percolating_directions(pf):
        fluid = pf.data == 0
        if not np.any(fluid):
            raise PercolationError("all-solid phase field: no fluid to flow")
        raise PercolationError("fluid phase does not percolate in any direction")
    system = _build_checked(pf, viscosity, [], tol)
    correctors = [system.solve(i) for i in range(g.n)]
    for c in correctors:
        if c.momentum_residual > tol or c.divergence_residual > max(tol, 1e-8):
            raise SolverError(
                f"Stokes solve residuals exceed tol={tol}: "
                f"momentum {c.momentum_residual:.3e}, "
                f"divergence {c.divergence_residual:.3e}",
                residual=c.momentum_residual,
            )
    K = np.zeros((g.n, g.n))
    for i, ci in enumerate(correctors):
        for j in range(g.n):
            K[i, j] = float(np.sum(ci.velocity[j])) / g.ncells
    energy = np.zeros((g.n, g.n))
    for i in range(g.n):
        for j in range(g.n):
            energy[i, j] = system.energy(correctors[i], correctors[j])
    porosity = float(np.count_nonzero(pf.data == 0)) / g.ncells
    return PermeabilityTensor(
        K, m=g.m, L=g.L, seed=seed, viscosity=viscosity, porosity=porosity,
        energy_matrix=energy,
        residuals=tuple(
            (c.momentum_residual, c.divergence_residual) for c in correctors
        ),
    )
