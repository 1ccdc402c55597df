"""Grid data model and geometric observables on the periodic window.

All fields live on a torus grid: n-dimensional, m cells per side, side
length L, cell spacing h = L/m.  Indicator fields (phase A vs B) are the
raster realization of a random closed set; scalar/vector fields hold
solver inputs and outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ContractError, ParameterError


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on [0, L)^n with m cells per side."""

    n: int
    m: int
    L: float = 1.0

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ParameterError(f"dimension must be 2 or 3, got {self.n}")
        if self.m < 8:
            raise ParameterError(f"resolution m must be >= 8, got {self.m}")
        if not self.L > 0:
            raise ParameterError(f"side length must be > 0, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @property
    def ncells(self) -> int:
        return self.m**self.n

    def cell_centers(self) -> np.ndarray:
        """Coordinates of all cell centers, shape (m,)*n + (n,)."""
        ax = (np.arange(self.m) + 0.5) * self.h
        mesh = np.meshgrid(*([ax] * self.n), indexing="ij")
        return np.stack(mesh, axis=-1)


@dataclass
class PhaseField:
    """Rasterized indicator of the closed set A on a torus grid.

    data is 1 on A (solid/grain phase by convention of the generating
    model) and 0 on B.  `degenerate` flags an all-A or all-B raster for
    a model that should have produced both phases.
    """

    grid: TorusGrid
    data: np.ndarray
    model: str = ""
    seed: int = 0
    degenerate: bool = False

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if self.data.shape != self.grid.shape:
            raise ContractError(
                f"data shape {self.data.shape} != grid shape {self.grid.shape}"
            )


@dataclass
class ScalarField:
    grid: TorusGrid
    values: np.ndarray
    name: str = "scalar"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ContractError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )


@dataclass
class VectorField:
    grid: TorusGrid
    values: np.ndarray  # shape grid.shape + (n,)
    name: str = "vector"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape + (self.grid.n,):
            raise ContractError(
                f"values shape {self.values.shape} != {self.grid.shape + (self.grid.n,)}"
            )


@dataclass
class CoefficientField:
    """Per-cell isotropic diffusivity; 0 marks masked (solid) cells."""

    grid: TorusGrid
    values: np.ndarray
    d_a: float = 1.0
    d_b: float = 1.0
    phase: PhaseField | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ContractError("coefficient shape mismatch")
        if np.any(self.values < 0):
            raise ParameterError("diffusivity values must be >= 0")

    @property
    def mask(self) -> np.ndarray:
        """Active (D > 0) cells."""
        return self.values > 0

    @property
    def has_mask(self) -> bool:
        return bool(np.any(self.values == 0))


def volume_fraction(pf: PhaseField) -> float:
    """Fraction of cells in phase A."""
    return float(np.count_nonzero(pf.data)) / pf.grid.ncells


def coefficient_field(pf: PhaseField, d_a: float, d_b: float) -> CoefficientField:
    """Diffusivity d_a on phase A, d_b on phase B (d_b = 0 masks B)."""
    if not d_a > 0:
        raise ParameterError(f"D_A must be > 0, got {d_a}")
    if d_b < 0:
        raise ParameterError(f"D_B must be >= 0, got {d_b}")
    vals = np.where(pf.data > 0, float(d_a), float(d_b))
    return CoefficientField(pf.grid, vals, d_a=d_a, d_b=d_b, phase=pf)


def interface_face_count(pf: PhaseField) -> int:
    """Number of grid faces separating A-cells from B-cells (torus wrap).

    This is the solver-facing interface representation; it overestimates
    geometric area by the Manhattan factor and is not used for the
    specific-surface estimate.
    """
    a = pf.data > 0
    count = 0
    for d in range(pf.grid.n):
        count += int(np.count_nonzero(a != np.roll(a, -1, axis=d)))
    return count


def specific_surface(pf: PhaseField, smooth_sigma: float = 1.0) -> float:
    """Interface measure of the A/B boundary per unit volume.

    Marching squares (n=2) / marching cubes (n=3) at level 0.5 on a
    mollified indicator.  The indicator is smoothed with a short periodic
    Gaussian first: on the raw {0,1} raster every crossing sits at an edge
    midpoint and the staircase bias (~5% for a disk) never converges away;
    smoothing restores sub-cell interface placement so the estimate
    converges under grid refinement.
    """
    a = pf.data.astype(np.float64)
    if a.min() == a.max():
        return 0.0
    if smooth_sigma > 0:
        a = ndimage.gaussian_filter(a, sigma=smooth_sigma, mode="wrap")
    g = pf.grid
    if g.n == 2:
        # per-cell marching squares on the periodic array: every crossing
        # fraction is interpolated from the lower-index corner, so the
        # multiset of segment lengths depends only on local values and the
        # estimate is bitwise shift-invariant after sorted summation
        lengths = _marching_squares_lengths(a, level=0.5)
        total = float(np.sum(np.sort(lengths)))
        return total * g.h / g.L**2
    else:
        from skimage import measure

        # marching-cubes triangulations re-split non-planar quad patches
        # under translation, which perturbs the total area; rolling the
        # array to a content-derived canonical origin makes all shifted
        # copies literally identical before meshing
        a = _canonical_roll(a)
        # one wrap layer on the high side: each physical cube of the torus
        # appears exactly once, so no window clipping is needed
        apad = np.pad(a, (0, 1), mode="wrap")
        verts, faces, _, _ = measure.marching_cubes(apad, level=0.5)
        tri = verts[faces]
        v0 = tri[:, 1] - tri[:, 0]
        v1 = tri[:, 2] - tri[:, 0]
        areas = 0.5 * np.linalg.norm(np.cross(v0, v1), axis=1)
        return float(np.sum(np.sort(areas))) * g.h**2 / g.L**3


def _canonical_roll(a: np.ndarray) -> np.ndarray:
    """Roll a periodic array to a canonical origin chosen from its content.

    The origin minimizes a local irrational-weighted hash; hash ties (exact
    symmetries) are broken lexicographically, so every cyclic shift of the
    input maps to the same output array.
    """
    # distance from the iso-level: minima sit on the interface, where the
    # smoothed values vary, so the minimizer is generically unique (the
    # saturated bulk regions are all at the maximal hash value)
    b = np.abs(a - 0.5)
    h = b.copy()
    for d in range(a.ndim):
        h += (np.pi + d) * np.roll(b, -1, axis=d)
        h += (np.e + d) * np.roll(b, 1, axis=d)
    flat = h.ravel()
    candidates = np.flatnonzero(flat == flat.min())
    axes = tuple(range(a.ndim))
    best = None
    for idx in candidates:
        pos = np.unravel_index(idx, a.shape)
        rolled = np.roll(a, tuple(-p for p in pos), axis=axes)
        if best is None:
            best = rolled
            continue
        neq = rolled.ravel() != best.ravel()
        if neq.any() and rolled.ravel()[np.argmax(neq)] < best.ravel()[np.argmax(neq)]:
            best = rolled
    return best


def _marching_squares_lengths(a: np.ndarray, level: float) -> np.ndarray:
    """Iso-contour segment lengths per 2x2 cell of a periodic array.

    Saddle cells are disambiguated by the cell-average rule.  Returns the
    flat array of all segment lengths (zeros where a cell has no contour).
    """
    v00 = a
    v01 = np.roll(a, -1, axis=1)
    v10 = np.roll(a, -1, axis=0)
    v11 = np.roll(v10, -1, axis=1)

    def frac(lo, hi):
        den = hi - lo
        return np.where(den != 0.0, (level - lo) / np.where(den != 0.0, den, 1.0), 0.5)

    ft = frac(v00, v01)  # top edge, along columns
    fb = frac(v10, v11)  # bottom edge
    fl = frac(v00, v10)  # left edge, along rows
    fr = frac(v01, v11)  # right edge

    i00, i01, i10, i11 = v00 > level, v01 > level, v10 > level, v11 > level
    case = (i00 * 1 + i01 * 2 + i11 * 4 + i10 * 8).astype(np.int8)

    corner00 = np.hypot(fl, ft)  # segment isolating corner (0,0)
    corner01 = np.hypot(fr, 1.0 - ft)
    corner11 = np.hypot(1.0 - fr, 1.0 - fb)
    corner10 = np.hypot(1.0 - fl, fb)
    across_v = np.hypot(fr - fl, 1.0)  # contour running left edge -> right
    across_h = np.hypot(1.0, fb - ft)  # contour running top edge -> bottom

    center = 0.25 * (v00 + v01 + v10 + v11) > level
    zero = np.zeros_like(a)
    seg1 = np.select(
        [case == 1, case == 14, case == 2, case == 13,
         case == 4, case == 11, case == 8, case == 7,
         case == 3, case == 12, case == 9, case == 6,
         case == 5, case == 10],
        [corner00, corner00, corner01, corner01,
         corner11, corner11, corner10, corner10,
         across_v, across_v, across_h, across_h,
         np.where(center, corner01, corner00),
         np.where(center, corner00, corner01)],
        default=zero,
    )
    seg2 = np.select(
        [case == 5, case == 10],
        [np.where(center, corner10, corner11),
         np.where(center, corner11, corner10)],
        default=zero,
    )
    return np.concatenate([seg1.ravel(), seg2.ravel()])
