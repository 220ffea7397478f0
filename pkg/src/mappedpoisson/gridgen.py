"""Elliptic grid generation: physical coordinates as discrete harmonic functions.

Boundary correspondences (outer edges and optionally the ring of an embedded
rectangular subregion) are imposed as Dirichlet data and x', y' are each
obtained from a Laplace solve on the computational grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discrete import ProblemInstance, apply_bc
from .fields import EDGES, BoundarySpec, Dirichlet, UniformGrid
from .multigrid import build_hierarchy, mg_solve
from .transform import Identity, MaterialTensor, Tabulated, jacobian_numeric


@dataclass
class BoundaryMap:
    """Physical images of the boundary nodes.

    ``outer`` maps each edge name to ``(x', y')`` arrays along that edge
    (ordered by increasing computational coordinate). ``ring`` is an optional
    node mask of an embedded rectangle boundary whose images are given in the
    full-size arrays ``ring_x``/``ring_y``.
    """

    outer: dict
    ring: np.ndarray | None = None
    ring_x: np.ndarray | None = None
    ring_y: np.ndarray | None = None
    subregion: tuple | None = None

    def check_corners(self, grid: UniformGrid, atol: float = 1e-12) -> None:
        corner_of = {("west", "south"): (0, 0), ("west", "north"): (0, -1),
                     ("east", "south"): (-1, 0), ("east", "north"): (-1, -1)}
        for (ve, he), (a, b) in corner_of.items():
            pv = np.array(self.outer[ve])[:, b]
            ph = np.array(self.outer[he])[:, a]
            if not np.allclose(pv, ph, rtol=0, atol=atol):
                raise ValueError(f"boundary traces disagree at the {ve}/{he} corner")


def _identity_outer(grid: UniformGrid) -> dict:
    out = {}
    for edge in EDGES:
        ii, jj = grid.edge_nodes(edge)
        out[edge] = (grid.x[ii].copy(), grid.y[jj].copy())
    return out


def _subregion_indices(grid: UniformGrid, x0, xc, y0, yc):
    try:
        i0, j0 = grid.index_of(x0, y0)
        i1, j1 = grid.index_of(xc, yc)
    except ValueError as exc:
        raise ValueError(f"subregion [{x0}, {xc}]x[{y0}, {yc}] is not node-aligned: {exc}") from None
    if not (0 < i0 < i1 < grid.nx - 1 and 0 < j0 < j1 < grid.ny - 1):
        raise ValueError("subregion must lie strictly inside the domain")
    return i0, i1, j0, j1


def _ring(grid: UniformGrid, i0, i1, j0, j1) -> np.ndarray:
    m = np.zeros(grid.shape, dtype=bool)
    m[i0:i1 + 1, [j0, j1]] = True
    m[[i0, i1], j0:j1 + 1] = True
    return m


@dataclass(frozen=True)
class SquareToCircle:
    """Map the sides of a square of half-width ``b`` onto the four quadrants of a circle of radius ``b``.

    When the grid extents equal the square the correspondence is applied on the
    outer boundary; when the square sits strictly inside the grid it is applied
    on the embedded square's ring and the outer boundary stays fixed.
    """

    b: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("circle radius must be positive")

    def images(self, x, y, side: str):
        cx, cy = self.center
        u, v = np.asarray(x, float) - cx, np.asarray(y, float) - cy
        b = self.b
        if side in ("south", "north"):
            xp = u / math.sqrt(2.0)
            yp = b * np.sqrt(np.clip(1.0 - u * u / (2 * b * b), 0.0, None))
            yp = -yp if side == "south" else yp
        else:
            yp = v / math.sqrt(2.0)
            xp = b * np.sqrt(np.clip(1.0 - v * v / (2 * b * b), 0.0, None))
            xp = -xp if side == "west" else xp
        return xp + cx, yp + cy

    def square(self):
        cx, cy = self.center
        return cx - self.b, cx + self.b, cy - self.b, cy + self.b


@dataclass(frozen=True)
class SinusoidalDeform:
    """Sinusoidal displacement of the edges of an embedded rectangle.

    ``a`` is the amplitude in grid spacings and ``n`` the number of half-waves
    along each edge; the outer boundary remains identity-mapped.
    """

    a: float
    n: int
    x0: float
    xc: float
    y0: float
    yc: float

    def __post_init__(self):
        if self.xc <= self.x0 or self.yc <= self.y0:
            raise ValueError("empty subregion")


def _rect_ring_trace(grid, bounds, fn):
    i0, i1, j0, j1 = _subregion_indices(grid, *bounds)
    ring = _ring(grid, i0, i1, j0, j1)
    X, Y = grid.mesh()
    rx, ry = X.copy(), Y.copy()
    for side, sl in (("south", (slice(i0, i1 + 1), j0)), ("north", (slice(i0, i1 + 1), j1)),
                     ("west", (i0, slice(j0, j1 + 1))), ("east", (i1, slice(j0, j1 + 1)))):
        xp, yp = fn(X[sl], Y[sl], side)
        rx[sl], ry[sl] = xp, yp
    return BoundaryMap(_identity_outer(grid), ring, rx, ry, (i0, i1, j0, j1))


def boundary_trace(spec, grid: UniformGrid) -> BoundaryMap:
    if isinstance(spec, SquareToCircle):
        sq = spec.square()
        if np.allclose(sq, grid.extents, rtol=0, atol=1e-12):
            outer = {}
            for edge in EDGES:
                ii, jj = grid.edge_nodes(edge)
                outer[edge] = spec.images(grid.x[ii], grid.y[jj], edge)
            bm = BoundaryMap(outer)
        else:
            bm = _rect_ring_trace(grid, sq, spec.images)
    elif isinstance(spec, SinusoidalDeform):
        amp_x, amp_y = spec.a * grid.dx, spec.a * grid.dy
        w, h = spec.xc - spec.x0, spec.yc - spec.y0

        def deform(x, y, side):
            x, y = np.array(x, float), np.array(y, float)
            if side == "west":
                return x - amp_x * np.sin(math.pi * spec.n * (y - spec.y0) / h), y
            if side == "east":
                return x + amp_x * np.sin(math.pi * spec.n * (y - spec.y0) / h), y
            if side == "south":
                return x, y - amp_y * np.sin(math.pi * spec.n * (x - spec.x0) / w)
            return x, y + amp_y * np.sin(math.pi * spec.n * (x - spec.x0) / w)

        bm = _rect_ring_trace(grid, (spec.x0, spec.xc, spec.y0, spec.yc), deform)
    else:
        raise TypeError(f"unsupported boundary specification {type(spec).__name__}")
    bm.check_corners(grid)
    return bm


def _laplace_component(grid, edge_values, ring, ring_values, start, tol, max_cycles):
    edges = {e: Dirichlet(np.asarray(v, float)) for e, v in edge_values.items()}
    bc = BoundarySpec(edges, ring, ring_values)
    inst = ProblemInstance(grid, MaterialTensor.identity(grid.shape), np.zeros(grid.shape), bc)
    hier = build_hierarchy(inst, Identity())
    phi0 = apply_bc(start.copy(), bc, grid)
    return mg_solve(hier, tol=tol, max_cycles=max_cycles, phi0=phi0)


def generate_map(boundary: BoundaryMap, grid: UniformGrid, tol: float = 1e-10,
                 max_cycles: int = 200) -> Tabulated:
    """Harmonic x', y' with the given boundary images; raises on a folded result."""
    X, Y = grid.mesh()
    fx = {e: v[0] for e, v in boundary.outer.items()}
    fy = {e: v[1] for e, v in boundary.outer.items()}
    rx = _laplace_component(grid, fx, boundary.ring, boundary.ring_x, X, tol, max_cycles)
    ry = _laplace_component(grid, fy, boundary.ring, boundary.ring_y, Y, tol, max_cycles)
    cmap = Tabulated(grid, rx.phi, ry.phi)
    jacobian_numeric(cmap.xprime, cmap.yprime, grid)
    return cmap


def quality_report(cmap: Tabulated) -> dict:
    g = cmap.grid
    jac = jacobian_numeric(cmap.xprime, cmap.yprime, g, check=False)
    det = jac.det
    xp, yp = cmap.xprime, cmap.yprime
    sx = np.hypot(np.diff(xp, axis=0), np.diff(yp, axis=0))
    sy = np.hypot(np.diff(xp, axis=1), np.diff(yp, axis=1))
    return {
        "nx": g.nx, "ny": g.ny,
        "min_det": float(det.min()), "max_det": float(det.max()),
        "min_spacing": float(min(sx.min(), sy.min())),
        "max_spacing": float(max(sx.max(), sy.max())),
        "orientation_ok": bool(np.all(det > 0)),
    }
