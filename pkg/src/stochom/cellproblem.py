"""Scalar corrector problems and the homogenized diffusion tensor.

Cell-centered finite volumes on the torus with harmonic face averaging;
the corrector for direction j solves div(D (grad phi_j + e_j)) = 0 with
periodic boundary conditions.  Faces touching a masked (D = 0) cell carry
zero conductivity, which realizes the zero-flux interface condition of
the perforated variant.  The effective tensor is the window average of
the fluxes D (grad phi_j + e_j).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ContractError, ParameterError, PercolationError, SolverError
from .fields import CoefficientField, ScalarField, TorusGrid, VectorField

# face conductivities are computed on a unit-spacing grid: the corrector
# gradient (grad phi + e_j) and hence the tensor are invariant under h


def face_conductivities(cf: CoefficientField) -> list[np.ndarray]:
    """Harmonic mean of D across each face; T[d][c] couples c and c+e_d."""
    D = cf.values
    out = []
    for d in range(cf.grid.n):
        Dn = np.roll(D, -1, axis=d)
        s = D + Dn
        with np.errstate(divide="ignore", invalid="ignore"):
            T = np.where(s > 0, 2.0 * D * Dn / np.where(s > 0, s, 1.0), 0.0)
        out.append(T)
    return out


def _torus_labels(mask: np.ndarray) -> np.ndarray:
    """Connected-component labels on the torus (face adjacency)."""
    labels, num = ndimage.label(mask)
    if num == 0:
        return labels
    parent = np.arange(num + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for d in range(mask.ndim):
        lo = np.take(labels, 0, axis=d)
        hi = np.take(labels, -1, axis=d)
        both = (lo > 0) & (hi > 0)
        for a, b in zip(lo[both].ravel(), hi[both].ravel()):
            union(int(a), int(b))
    remap = np.array([find(i) for i in range(num + 1)])
    return remap[labels]


def percolates(mask: np.ndarray, axis: int) -> bool:
    """True when some component wraps around the torus in `axis`.

    Components are labeled without the wrap link in `axis` (with it in all
    others); a winding path exists iff a cell on the last slice connects to
    its wrap neighbor on the first slice within the same label.
    """
    if not np.any(mask):
        return False
    labels, num = ndimage.label(mask)
    if num == 0:
        return False
    parent = np.arange(num + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for d in range(mask.ndim):
        if d == axis:
            continue
        lo = np.take(labels, 0, axis=d)
        hi = np.take(labels, -1, axis=d)
        both = (lo > 0) & (hi > 0)
        for a, b in zip(lo[both].ravel(), hi[both].ravel()):
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    lo = np.take(labels, 0, axis=axis)
    hi = np.take(labels, -1, axis=axis)
    both = (lo > 0) & (hi > 0)
    return any(
        find(int(a)) == find(int(b))
        for a, b in zip(hi[both].ravel(), lo[both].ravel())
    )


def check_percolation(cf: CoefficientField, axis: int) -> None:
    if not cf.has_mask:
        return
    mask = cf.mask
    labels = _torus_labels(mask)
    if len(np.unique(labels[mask])) > 1:
        raise PercolationError("active mask is disconnected on the torus")
    if not percolates(mask, axis):
        raise PercolationError(
            f"active mask does not percolate in direction {axis}"
        )


@dataclass
class Corrector:
    direction: int
    phi: ScalarField
    residual: float
    iterations: int
    coefficients: CoefficientField = field(repr=False, default=None)


def _apply_operator(phi: np.ndarray, T: list[np.ndarray]) -> np.ndarray:
    """A phi = -div(D grad phi) with harmonic face conductivities."""
    out = np.zeros_like(phi)
    for d, Td in enumerate(T):
        up = np.roll(phi, -1, axis=d) - phi
        flux = Td * up
        out -= flux - np.roll(flux, 1, axis=d)
    return out


def solve_corrector(
    cf: CoefficientField,
    direction: int,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> Corrector:
    """Solve the corrector problem in the given direction (0-based).

    Preconditioned (Jacobi) conjugate gradients on the singular periodic
    system; the constant nullspace is removed by projecting iterates onto
    zero mean over the active cells.
    """
    g = cf.grid
    if not 0 <= direction < g.n:
        raise ParameterError(f"direction must be in 0..{g.n - 1}")
    if not 0 < tol < 1:
        raise ParameterError("tol must lie in (0, 1)")
    check_percolation(cf, direction)
    if max_iter is None:
        max_iter = 50 * g.m

    T = face_conductivities(cf)
    active = cf.mask
    nactive = np.count_nonzero(active)

    # b = div(D e_j): net e_j-flux imbalance per cell
    b = T[direction] - np.roll(T[direction], 1, axis=direction)

    diag = np.zeros(g.shape)
    for d, Td in enumerate(T):
        diag += Td + np.roll(Td, 1, axis=d)
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 0.0)

    bnorm = np.linalg.norm(b)
    phi = np.zeros(g.shape)
    if bnorm == 0.0:
        return Corrector(direction, ScalarField(g, phi, f"phi_{direction}"),
                         0.0, 0, cf)

    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(np.sum(r * z))
    it = 0
    res = np.linalg.norm(r) / bnorm
    while res > tol and it < max_iter:
        Ap = _apply_operator(p, T)
        alpha = rz / float(np.sum(p * Ap))
        phi += alpha * p
        r -= alpha * Ap
        # singular system: keep the iterate mean-free on the active set
        if nactive:
            phi[active] -= phi[active].mean()
        z = inv_diag * r
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        res = float(np.linalg.norm(r)) / bnorm
    if res > tol:
        raise SolverError(
            f"corrector CG did not reach tol={tol} in {max_iter} iterations "
            f"(residual {res:.3e})",
            residual=res,
        )
    if nactive:
        phi[active] -= phi[active].mean()
        phi[~active] = 0.0
    return Corrector(direction, ScalarField(g, phi, f"phi_{direction}"), res, it, cf)


@dataclass
class HomogenizedTensor:
    matrix: np.ndarray
    m: int
    L: float
    seed: int = 0
    d_a: float = 1.0
    d_b: float = 1.0
    residuals: tuple[float, ...] = ()

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)


def homogenized_tensor(
    cf: CoefficientField, correctors: list[Corrector], seed: int = 0
) -> HomogenizedTensor:
    """Window-averaged flux tensor D_hom[i, j] = <e_i . D (grad phi_j + e_j)>.

    The divisor is the total cell count m^n (probability-measure
    convention); masked cells contribute zero flux, so the perforated
    variant carries the porosity weighting.
    """
    g = cf.grid
    if len(correctors) != g.n:
        raise ContractError(f"need {g.n} correctors, got {len(correctors)}")
    T = face_conductivities(cf)
    mat = np.zeros((g.n, g.n))
    for c in correctors:
        if c.phi.grid != g:
            raise ContractError("corrector grid does not match coefficient grid")
        j = c.direction
        phi = c.phi.values
        for i in range(g.n):
            dphi = np.roll(phi, -1, axis=i) - phi
            flux = T[i] * (dphi + (1.0 if i == j else 0.0))
            mat[i, j] = float(np.sum(flux)) / g.ncells
    return HomogenizedTensor(
        mat, m=g.m, L=g.L, seed=seed, d_a=cf.d_a, d_b=cf.d_b,
        residuals=tuple(c.residual for c in correctors),
    )


def energy_tensor(cf: CoefficientField, correctors: list[Corrector]) -> np.ndarray:
    """Energy form <D (grad phi_i + e_i) . (grad phi_j + e_j)>.

    Equals the flux tensor at the exact solution; symmetric by
    construction, used as a cross-check.
    """
    g = cf.grid
    T = face_conductivities(cf)
    grads = []
    for c in sorted(correctors, key=lambda c: c.direction):
        phi = c.phi.values
        grads.append([
            np.roll(phi, -1, axis=d) - phi + (1.0 if d == c.direction else 0.0)
            for d in range(g.n)
        ])
    mat = np.zeros((g.n, g.n))
    for i in range(g.n):
        for j in range(g.n):
            mat[i, j] = sum(
                float(np.sum(T[d] * grads[i][d] * grads[j][d]))
                for d in range(g.n)
            ) / g.ncells
    return mat


def voigt_reuss(cf: CoefficientField) -> tuple[float, float]:
    """Classical bounds: (harmonic mean, arithmetic mean) of D over cells."""
    if cf.has_mask:
        raise ParameterError("Voigt-Reuss bounds require a full-phase field")
    vals = cf.values.ravel()
    lower = len(vals) / float(np.sum(1.0 / vals))
    upper = float(np.mean(vals))
    return lower, upper


def reconstruct_first_order(
    u0: ScalarField,
    grad_u0: VectorField,
    correctors: list[Corrector],
    epsilon: float,
) -> ScalarField:
    """First-order two-scale reconstruction u0(x) + eps * phi_j(x/eps) d_j u0(x).

    The micro window must tile the macro domain: Lambda = P * eps * L_micro
    with integer P.  Macro data is interpolated bilinearly to the fine
    grid; correctors are tiled periodically.
    """
    if epsilon <= 0:
        raise ParameterError("epsilon must be > 0")
    gm = correctors[0].phi.grid
    gM = u0.grid
    if grad_u0.grid != gM:
        raise ContractError("u0 and grad_u0 must share a grid")
    if len(correctors) != gm.n or gM.n != gm.n:
        raise ContractError("need one corrector per dimension on a matching grid")
    periods = gM.L / (epsilon * gm.L)
    P = int(round(periods))
    if P < 1 or abs(periods - P) > 1e-9:
        raise ContractError(
            f"micro window (eps*L = {epsilon * gm.L}) does not tile the "
            f"macro domain (Lambda = {gM.L})"
        )
    n = gm.n
    mfine = P * gm.m
    fine_ax = (np.arange(mfine) + 0.5) * (gM.L / mfine)
    mesh = np.meshgrid(*([fine_ax] * n), indexing="ij")

    # bilinear interpolation of periodicity-free macro data (clamped order=1)
    def macro_at(values):
        coords = [(ax / gM.h - 0.5) for ax in mesh]
        return ndimage.map_coordinates(
            values, np.array(coords), order=1, mode="nearest"
        )

    out = macro_at(u0.values)
    tiles = (P,) * n
    for c in sorted(correctors, key=lambda c: c.direction):
        phi_fine = np.tile(c.phi.values, tiles)
        out = out + epsilon * phi_fine * macro_at(grad_u0.values[..., c.direction])
    return ScalarField(TorusGrid(n, mfine, gM.L), out, name="u_eps")
