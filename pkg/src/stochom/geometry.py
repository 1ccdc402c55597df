"""Seeded stationary random geometries on a periodic window.

Point processes (Poisson, Matern hard-core, regular lattice), periodic
Voronoi/Delaunay structures, interpolated grain surfaces, and the
rasterizers that turn each model into a two-phase indicator field.  All
sampling is a pure function of (parameters, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .errors import ContractError, ParameterError
from .fields import PhaseField, TorusGrid


@dataclass(frozen=True)
class Window:
    """Periodic cube [0, L)^n."""

    n: int
    L: float = 1.0

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ParameterError(f"dimension must be 2 or 3, got {self.n}")
        if not self.L > 0:
            raise ParameterError(f"side length must be > 0, got {self.L}")

    @property
    def volume(self) -> float:
        return self.L**self.n


@dataclass
class PointSet:
    window: Window
    points: np.ndarray  # (N, n), all coordinates in [0, L)
    seed: int = 0
    model: str = "poisson"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, self.window.n)
        if pts.size and (pts.min() < 0 or pts.max() >= self.window.L):
            raise ContractError("points must lie in [0, L)^n")
        self.points = pts

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class Tessellation:
    """Periodic Voronoi tessellation of the torus.

    cells[i] is the polygon (2D, ccw) or vertex cloud (3D) of generator i,
    unwrapped around the generator.  edges hold the Delaunay dual: one
    entry (i, j, offset) per shared facet, offset being the integer image
    shift of generator j that realizes the facet.
    """

    generators: PointSet
    cells: list[np.ndarray]
    volumes: np.ndarray
    edges: list[tuple[int, int, tuple[int, ...]]] = field(default_factory=list)

    @property
    def adjacency(self) -> set[tuple[int, int]]:
        pairs = set()
        for i, j, _ in self.edges:
            pairs.add((i, j))
            pairs.add((j, i))
        return pairs


@dataclass
class GrainModel:
    """Smooth grain around one generator, interpolating boundary hit-points.

    The implicit value is

        d(c, x) = sum_i |x-c|^2/|b_i-c|^2 * prod_{j!=i} |x-b_j|^2/|b_i-b_j|^2

    with the grain being {d <= 1}; d(c, c) = 0 and d(c, b_i) = 1 hold
    structurally.
    """

    center: np.ndarray
    boundary: np.ndarray  # (k, n)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.boundary = np.asarray(self.boundary, dtype=np.float64)
        diffs = self.boundary[:, None, :] - self.boundary[None, :, :]
        dist2 = np.sum(diffs**2, axis=-1)
        np.fill_diagonal(dist2, 1.0)
        if np.any(dist2 == 0) or np.any(
            np.sum((self.boundary - self.center) ** 2, axis=1) == 0
        ):
            raise ParameterError("coincident grain boundary points")


# ---------------------------------------------------------------- torus metric


def torus_delta(p: np.ndarray, q: np.ndarray, L: float) -> np.ndarray:
    """Minimum-image displacement p - q on the torus."""
    d = p - q
    return d - L * np.round(d / L)


def torus_distance(p: np.ndarray, q: np.ndarray, L: float) -> np.ndarray:
    return np.linalg.norm(torus_delta(p, q, L), axis=-1)


# ------------------------------------------------------------- point processes


def sample_poisson(window: Window, intensity: float, seed: int) -> PointSet:
    """Homogeneous Poisson process: N ~ Poisson(intensity * L^n), i.i.d. uniforms."""
    if intensity < 0:
        raise ParameterError(f"intensity must be >= 0, got {intensity}")
    rng = np.random.default_rng(seed)
    count = int(rng.poisson(intensity * window.volume))
    pts = rng.random((count, window.n)) * window.L
    return PointSet(window, pts, seed=seed, model="poisson")


def lattice_points(window: Window, per_side: int) -> PointSet:
    """Regular lattice of per_side^n points, offset half a spacing."""
    if per_side < 1:
        raise ParameterError("per_side must be >= 1")
    ax = (np.arange(per_side) + 0.5) * (window.L / per_side)
    mesh = np.meshgrid(*([ax] * window.n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return PointSet(window, pts, seed=0, model="lattice")


def matern_thin(
    pts: PointSet, hardcore_radius: float, variant: str = "I", seed: int | None = None
) -> PointSet:
    """Matern hard-core thinning on the torus.

    Variant I erases every point with a neighbor closer than the hard-core
    radius; variant II assigns i.i.d. marks and keeps a point iff no
    neighbor within the radius carries a smaller mark.
    """
    if hardcore_radius < 0:
        raise ParameterError("hardcore radius must be >= 0")
    if variant not in ("I", "II"):
        raise ParameterError(f"variant must be 'I' or 'II', got {variant!r}")
    n_pts = len(pts)
    if hardcore_radius == 0 or n_pts == 0:
        return PointSet(pts.window, pts.points.copy(), seed=pts.seed,
                        model=f"matern{1 if variant == 'I' else 2}")
    tree = cKDTree(pts.points, boxsize=pts.window.L)
    pairs = tree.query_pairs(hardcore_radius, output_type="ndarray")
    # query_pairs uses strict-inequality semantics up to fp rounding; the
    # hard-core contract is distance >= d for survivors either way
    keep = np.ones(n_pts, dtype=bool)
    if variant == "I":
        keep[pairs.ravel()] = False
    else:
        rng = np.random.default_rng(pts.seed if seed is None else seed)
        marks = rng.random(n_pts)
        for a, b in pairs:
            if marks[a] < marks[b]:
                keep[b] = False
            else:
                keep[a] = False
    return PointSet(pts.window, pts.points[keep], seed=pts.seed,
                    model=f"matern{1 if variant == 'I' else 2}")


# ------------------------------------------------------- Voronoi / Delaunay


def _ghost_points(pts: PointSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """3^n periodic copies; returns (tiled points, source index, offset per copy)."""
    n, L = pts.window.n, pts.window.L
    shifts = np.array(
        np.meshgrid(*([[-1, 0, 1]] * n), indexing="ij")
    ).reshape(n, -1).T
    # center copy first so original indices stay 0..N-1
    order = np.argsort([np.count_nonzero(s) for s in shifts], kind="stable")
    shifts = shifts[order]
    tiled = np.concatenate([pts.points + s * L for s in shifts])
    src = np.tile(np.arange(len(pts)), len(shifts))
    offs = np.repeat(shifts, len(pts), axis=0)
    return tiled, src, offs


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def voronoi(pts: PointSet) -> Tessellation:
    """Periodic Voronoi tessellation via 3^n ghost copies.

    Valid when the window side exceeds twice the largest cell diameter
    (asserted); zero-measure facets from cocircular degeneracies are
    dropped, which resolves ties deterministically (generators are kept
    in input order; qhull merges degenerate vertices).
    """
    if len(pts) == 0:
        raise ParameterError("tessellation needs at least one point")
    window = pts.window
    n, L = window.n, window.L
    if len(pts) == 1:
        # single cell covering the torus
        corners = np.array(
            np.meshgrid(*([[0.0, L]] * n), indexing="ij")
        ).reshape(n, -1).T
        if n == 2:
            corners = corners[[0, 1, 3, 2]]
        # the cell is its own neighbour once through each axis of the torus
        self_edges = [
            (0, 0, tuple(int(d == a) for d in range(n))) for a in range(n)
        ]
        return Tessellation(pts, [corners], np.array([L**n]), edges=self_edges)

    tiled, src, offs = _ghost_points(pts)
    vor = Voronoi(tiled)

    cells: list[np.ndarray] = []
    volumes = np.empty(len(pts))
    for i in range(len(pts)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) == 0:
            raise ParameterError(
                "unbounded periodic cell: window too small for this point set"
            )
        verts = vor.vertices[region]
        # any image outside the 3^n block is at least L away from the window,
        # so cells reaching that far could see unrepresented neighbors
        circumradius = np.max(np.linalg.norm(verts - pts.points[i], axis=1))
        if circumradius >= L:
            raise ParameterError(
                "cell circumradius exceeds L; 3^n ghost periodization invalid"
            )
        if n == 2:
            ang = np.arctan2(*(verts - pts.points[i]).T[::-1])
            verts = verts[np.argsort(ang, kind="stable")]
            volumes[i] = _polygon_area(verts)
        else:
            from scipy.spatial import ConvexHull

            volumes[i] = ConvexHull(verts).volume
        cells.append(verts)

    edges: dict[tuple, tuple[int, int, tuple[int, ...]]] = {}
    facet_tol = 1e-12 * L
    for (a, b), ridge in zip(vor.ridge_points, vor.ridge_vertices):
        if a >= len(pts) and b >= len(pts):
            continue
        if -1 in ridge:
            continue
        rverts = vor.vertices[ridge]
        if n == 2:
            measure = np.linalg.norm(rverts[1] - rverts[0])
        else:
            centroid = rverts.mean(axis=0)
            d = rverts - centroid
            measure = 0.0
            for k in range(len(rverts)):
                measure += 0.5 * np.linalg.norm(
                    np.cross(d[k], d[(k + 1) % len(rverts)])
                )
        if measure <= facet_tol:
            continue  # degenerate (cocircular) facet: dropped on both sides
        if b < len(pts):  # keep a as the in-window endpoint
            a, b = (a, b) if a < len(pts) else (b, a)
        i, j = int(src[a]), int(src[b])
        off = tuple(int(o) for o in (offs[b] - offs[a]))
        if i > j:
            i, j, off = j, i, tuple(-o for o in off)
        elif i == j:
            # same generator through the torus: one record per facet pair
            nz = next((o for o in off if o != 0), 0)
            if nz < 0:
                off = tuple(-o for o in off)
        key = (i, j) + off
        if key not in edges:
            edges[key] = (key[0], key[1], key[2:])
    edge_list = sorted(edges.values())

    return Tessellation(pts, cells, volumes, edges=edge_list)


def delaunay(tess: Tessellation) -> list[tuple[int, int, tuple[int, ...]]]:
    """Delaunay dual: one edge per shared Voronoi facet, with image offset."""
    return list(tess.edges)


def build_grains(tess: Tessellation) -> list[GrainModel]:
    """Grain per generator: boundary hit-points are the Delaunay-edge /
    Voronoi-facet intersections, i.e. the edge midpoints on the bisectors."""
    pts = tess.generators.points
    L = tess.generators.window.L
    boundary: dict[int, list[np.ndarray]] = {i: [] for i in range(len(pts))}
    for i, j, off in tess.edges:
        qj = pts[j] + np.array(off, dtype=float) * L
        mid = 0.5 * (pts[i] + qj)
        boundary[i].append(mid)
        # seen from j, i sits at the opposite image offset
        qi = pts[i] - np.array(off, dtype=float) * L
        boundary[j].append(0.5 * (pts[j] + qi))
    return [
        GrainModel(pts[i], np.array(boundary[i]))
        for i in range(len(pts))
        if boundary[i]
    ]


def grain_indicator(gm: GrainModel, x: np.ndarray) -> np.ndarray:
    """Evaluate the interpolated grain function d(center, x).

    x may be a single point (n,) or a batch (..., n); membership in the
    grain is d <= 1.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xs = x.reshape(-1, gm.center.shape[0])
    c, b = gm.center, gm.boundary
    k = len(b)
    xc = np.sum((xs - c) ** 2, axis=1)  # |x - c|^2
    xb = np.sum((xs[:, None, :] - b[None, :, :]) ** 2, axis=2)  # |x - b_j|^2
    bc = np.sum((b - c) ** 2, axis=1)  # |b_i - c|^2
    bb = np.sum((b[:, None, :] - b[None, :, :]) ** 2, axis=2)  # |b_i - b_j|^2
    out = np.zeros(len(xs))
    for i in range(k):
        term = xc / bc[i]
        for j in range(k):
            if j != i:
                term = term * (xb[:, j] / bb[i, j])
        out += term
    return float(out[0]) if single else out.reshape(x.shape[:-1])


# ---------------------------------------------------------------- rasterizers


def _finalize(grid: TorusGrid, inside: np.ndarray, model: str, seed: int,
              expect_two_phase: bool = True) -> PhaseField:
    frac = np.count_nonzero(inside) / inside.size
    degenerate = expect_two_phase and frac in (0.0, 1.0)
    return PhaseField(grid, inside.astype(np.uint8), model=model, seed=seed,
                      degenerate=degenerate)


def rasterize_balls(pts: PointSet, radius: float, m: int) -> PhaseField:
    """Boolean model: union of closed balls of fixed radius at the points."""
    if radius < 0:
        raise ParameterError("radius must be >= 0")
    w = pts.window
    grid = TorusGrid(w.n, m, w.L)
    inside = np.zeros(grid.shape, dtype=bool)
    if len(pts) and radius > 0:
        centers = grid.cell_centers().reshape(-1, w.n)
        tree = cKDTree(pts.points, boxsize=w.L)
        dist, _ = tree.query(centers, k=1)
        inside = (dist <= radius).reshape(grid.shape)
    return _finalize(grid, inside, "balls", pts.seed,
                     expect_two_phase=len(pts) > 0 and radius > 0)


def rasterize_voronoi_walls(pts: PointSet, m: int, thickness: float = 1.0) -> PhaseField:
    """Solid walls of given thickness (in cells) along Voronoi facets.

    A cell center x is solid when the gap between its two nearest
    generators, (d2 - d1)/2, is at most half the wall thickness.
    """
    if thickness <= 0:
        raise ParameterError("thickness must be > 0")
    if len(pts) < 2:
        raise ParameterError("wall model needs at least two points")
    w = pts.window
    grid = TorusGrid(w.n, m, w.L)
    centers = grid.cell_centers().reshape(-1, w.n)
    tree = cKDTree(pts.points, boxsize=w.L)
    dist, _ = tree.query(centers, k=2)
    inside = ((dist[:, 1] - dist[:, 0]) <= thickness * grid.h).reshape(grid.shape)
    return _finalize(grid, inside, "voronoi_walls", pts.seed)


def rasterize_pipes(
    pts: PointSet,
    edges: list[tuple[int, int, tuple[int, ...]]],
    radius: float,
    m: int,
) -> PhaseField:
    """Union of cylinders (pipes) of fixed radius along Delaunay edges."""
    if radius <= 0:
        raise ParameterError("pipe radius must be > 0")
    w = pts.window
    grid = TorusGrid(w.n, m, w.L)
    centers = grid.cell_centers().reshape(-1, w.n)
    shifts = np.array(
        np.meshgrid(*([[-1, 0, 1]] * w.n), indexing="ij")
    ).reshape(w.n, -1).T * w.L
    inside = np.zeros(len(centers), dtype=bool)
    r2 = radius * radius
    for i, j, off in edges:
        a = pts.points[i]
        b = pts.points[j] + np.array(off, dtype=float) * w.L
        ab = b - a
        ab2 = float(np.dot(ab, ab))
        for s in shifts:
            rel = centers + s - a
            t = np.clip(rel @ ab / ab2, 0.0, 1.0) if ab2 > 0 else 0.0
            closest = np.outer(t, ab) if ab2 > 0 else np.zeros_like(rel)
            d2 = np.sum((rel - closest) ** 2, axis=1)
            inside |= d2 <= r2
    return _finalize(grid, inside.reshape(grid.shape), "pipes", pts.seed)


def rasterize_grains(grains: list[GrainModel], window: Window, m: int,
                     seed: int = 0) -> PhaseField:
    """Union of interpolated grains G = {d <= 1}."""
    grid = TorusGrid(window.n, m, window.L)
    centers = grid.cell_centers().reshape(-1, window.n)
    inside = np.zeros(len(centers), dtype=bool)
    for gm in grains:
        # evaluate in the minimum image around the grain center
        local = torus_delta(centers, gm.center, window.L) + gm.center
        reach = np.max(np.linalg.norm(gm.boundary - gm.center, axis=1))
        near = np.linalg.norm(local - gm.center, axis=1) <= 1.5 * reach
        if np.any(near):
            vals = grain_indicator(gm, local[near])
            sub = inside[near]
            sub |= vals <= 1.0
            inside[near] = sub
    return _finalize(grid, inside.reshape(grid.shape), "grains", seed)


def rasterize_lattice_balls(window: Window, per_side: int, radius: float,
                            m: int) -> PhaseField:
    """Periodic disk/sphere lattice, rasterized one period and tiled.

    Tiling guarantees the raster is exactly periodic, so windows holding
    1, 2, 4 ... periods reproduce identical microstructure bit for bit.
    """
    if m % per_side != 0:
        raise ParameterError("m must be a multiple of per_side for exact tiling")
    q = m // per_side
    p = window.L / per_side
    tile_grid = np.meshgrid(
        *([(np.arange(q) + 0.5) * (p / q)] * window.n), indexing="ij"
    )
    d2 = sum((t - p / 2) ** 2 for t in tile_grid)
    tile = d2 <= radius * radius
    inside = np.tile(tile, (per_side,) * window.n)
    grid = TorusGrid(window.n, m, window.L)
    return _finalize(grid, inside, "lattice_balls", 0,
                     expect_two_phase=radius > 0)


def checkerboard(n: int, m: int, L: float = 1.0, blocks: int = 2) -> PhaseField:
    """Periodic checkerboard with `blocks` phase squares per side (even)."""
    if blocks % 2 != 0:
        raise ParameterError("blocks must be even for a periodic checkerboard")
    if m % blocks != 0:
        raise ParameterError("m must be a multiple of blocks")
    q = m // blocks
    idx = [np.arange(m) // q for _ in range(n)]
    mesh = np.meshgrid(*idx, indexing="ij")
    inside = sum(mesh) % 2 == 0
    return _finalize(TorusGrid(n, m, L), inside, "checkerboard", 0)


def layered(n: int, m: int, fraction: float = 0.5, axis: int = 0,
            L: float = 1.0) -> PhaseField:
    """Two-phase layers perpendicular to `axis`; phase A occupies `fraction`."""
    if not 0 <= fraction <= 1:
        raise ParameterError("fraction must lie in [0, 1]")
    cut = int(round(fraction * m))
    line = np.arange(m) < cut
    shape = [1] * n
    shape[axis] = m
    inside = np.broadcast_to(line.reshape(shape), (m,) * n)
    return _finalize(TorusGrid(n, m, L), inside.copy(), "layers", 0,
                     expect_two_phase=0 < cut < m)


def shift(pf: PhaseField, v) -> PhaseField:
    """Shift the raster by an integer lattice vector (torus wrap)."""
    v = np.asarray(v, dtype=int)
    if v.shape != (pf.grid.n,):
        raise ParameterError(f"shift vector must have {pf.grid.n} components")
    data = pf.data
    for d in range(pf.grid.n):
        data = np.roll(data, -int(v[d]), axis=d)
    return PhaseField(pf.grid, data, model=pf.model, seed=pf.seed,
                      degenerate=pf.degenerate)
