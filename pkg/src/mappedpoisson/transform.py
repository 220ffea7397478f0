"""Coordinate maps, Jacobians and the equivalent anisotropic permittivity.

A map sends computational coordinates ``(x, y)`` on a uniform grid to
physical coordinates ``(x', y')``. With unit permittivity in physical space
the computational-space tensor is ``det(J) J^-1 J^-T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, UniformGrid, make_grid, read_grid_csv


class OrientationError(ValueError):
    """Raised when det(J) <= 0 somewhere, i.e. the map folds or flips."""


@dataclass
class JacobianField:
    j_xx: np.ndarray
    j_xy: np.ndarray
    j_yx: np.ndarray
    j_yy: np.ndarray

    @property
    def det(self) -> np.ndarray:
        return self.j_xx * self.j_yy - self.j_xy * self.j_yx

    def check_orientation(self) -> None:
        det = self.det
        bad = ~(det > 0)
        if bad.any():
            idx = tuple(int(v) for v in np.argwhere(bad)[0])
            raise OrientationError(
                f"non-positive Jacobian determinant {det[idx]:.3e} at node {idx} "
                f"({int(bad.sum())} node(s) affected)")


@dataclass
class MaterialTensor:
    e_xx: np.ndarray
    e_xy: np.ndarray
    e_yx: np.ndarray
    e_yy: np.ndarray
    det_j: np.ndarray

    @classmethod
    def identity(cls, shape) -> "MaterialTensor":
        one, zero = np.ones(shape), np.zeros(shape)
        return cls(one, zero, zero.copy(), one.copy(), one.copy())

    @property
    def shape(self):
        return self.e_xx.shape

    def validate(self, atol: float = 1e-12) -> None:
        if not np.allclose(self.e_xy, self.e_yx, rtol=0, atol=atol):
            raise ValueError("permittivity tensor is not symmetric")
        if not (np.all(self.e_xx > 0) and np.all(self.e_yy > 0)):
            raise ValueError("diagonal permittivity must be positive")
        if not np.all(self.e_xx * self.e_yy - self.e_xy * self.e_yx > 0):
            raise ValueError("permittivity tensor is not positive definite")


# ---------------------------------------------------------------------------
# maps


class CoordinateMap:
    closed_form = True

    def point(self, x, y):
        raise NotImplementedError

    def jacobian(self, grid: UniformGrid) -> JacobianField:
        """Jacobian sampled on ``grid``; exact for closed-form maps."""
        return jacobian_exact(self, grid)

    def physical_nodes(self, grid: UniformGrid) -> tuple[np.ndarray, np.ndarray]:
        X, Y = grid.mesh()
        return self.point(X, Y)


class Identity(CoordinateMap):
    def point(self, x, y):
        return np.asarray(x, dtype=float) * 1.0, np.asarray(y, dtype=float) * 1.0

    def _jac(self, x, y):
        one = np.ones(np.broadcast(x, y).shape)
        return one, 0 * one, 0 * one, one.copy()


@dataclass
class Polar(CoordinateMap):
    """``x' = x cos y``, ``y' = x sin y``; x is the radius, y the angle."""

    def point(self, x, y):
        return x * np.cos(y), x * np.sin(y)

    def _jac(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.cos(y), -x * np.sin(y), np.sin(y), x * np.cos(y)


@dataclass
class SinhStretch(CoordinateMap):
    """Separable ``x' = s sinh(alpha x)``, ``y' = s sinh(alpha y)``; dense near the origin."""

    s: float
    alpha: float

    def __post_init__(self):
        if self.s <= 0 or self.alpha <= 0:
            raise ValueError("sinh stretch needs s > 0 and alpha > 0")

    def point(self, x, y):
        return self.s * np.sinh(self.alpha * x), self.s * np.sinh(self.alpha * y)

    def _jac(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        sa = self.s * self.alpha
        zero = np.zeros(x.shape)
        return sa * np.cosh(self.alpha * x), zero, zero.copy(), sa * np.cosh(self.alpha * y)


class Tabulated(CoordinateMap):
    """Map known only at the nodes of one grid (e.g. from grid generation)."""

    closed_form = False

    def __init__(self, grid: UniformGrid, xprime, yprime):
        self.grid = grid
        self.xprime = np.asarray(getattr(xprime, "values", xprime), dtype=float)
        self.yprime = np.asarray(getattr(yprime, "values", yprime), dtype=float)
        if self.xprime.shape != grid.shape or self.yprime.shape != grid.shape:
            raise ValueError("tabulated coordinates must match the grid shape")

    def point(self, x, y):
        i, j = self.grid.index_of(float(x), float(y))
        return float(self.xprime[i, j]), float(self.yprime[i, j])

    def physical_nodes(self, grid: UniformGrid):
        xp, yp = self.sample(grid)
        return xp.copy(), yp.copy()

    def sample(self, grid: UniformGrid) -> tuple[np.ndarray, np.ndarray]:
        """Inject the stored coordinates onto ``grid`` (same grid or a 2^k coarsening)."""
        g = self.grid
        if grid.extents != g.extents:
            raise ValueError("grid extents differ from the tabulated map")
        if (g.nx - 1) % (grid.nx - 1) or (g.ny - 1) % (grid.ny - 1):
            raise ValueError(f"grid {grid.nx}x{grid.ny} is not a coarsening of {g.nx}x{g.ny}")
        sx, sy = (g.nx - 1) // (grid.nx - 1), (g.ny - 1) // (grid.ny - 1)
        return self.xprime[::sx, ::sy], self.yprime[::sx, ::sy]

    def jacobian(self, grid: UniformGrid) -> JacobianField:
        xp, yp = self.sample(grid)
        return jacobian_numeric(xp, yp, grid)

    def to_csv(self) -> str:
        g = self.grid
        X, Y = g.mesh()
        lines = [f"# {g.nx},{g.ny},{g.x_min!r},{g.x_max!r},{g.y_min!r},{g.y_max!r}",
                 "x,y,xprime,yprime"]
        for row in zip(X.ravel(), Y.ravel(), self.xprime.ravel(), self.yprime.ravel()):
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "Tabulated":
        grid, cols = read_grid_csv(text)
        return cls(grid, cols[:, 2].reshape(grid.shape), cols[:, 3].reshape(grid.shape))


def map_point(cmap: CoordinateMap, x, y):
    return cmap.point(x, y)


def jacobian_exact(cmap: CoordinateMap, grid: UniformGrid) -> JacobianField:
    if not cmap.closed_form:
        raise TypeError("exact Jacobian is only available for closed-form maps")
    X, Y = grid.mesh()
    return JacobianField(*cmap._jac(X, Y))


def _diff(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    # central inside, second-order one-sided on the boundary nodes
    return np.gradient(f, h, axis=axis, edge_order=2)


def jacobian_numeric(xprime, yprime, grid: UniformGrid | None = None, check: bool = True) -> JacobianField:
    """Finite-difference Jacobian of tabulated physical coordinates.

    ``xprime``/``yprime`` are ScalarFields, or plain arrays together with ``grid``.
    """
    if grid is None:
        grid = xprime.grid
        if yprime.grid != grid:
            raise ValueError("x' and y' live on different grids")
    xp = np.asarray(getattr(xprime, "values", xprime), dtype=float)
    yp = np.asarray(getattr(yprime, "values", yprime), dtype=float)
    if xp.shape != grid.shape or yp.shape != grid.shape:
        raise ValueError("coordinate arrays do not match the grid")
    jac = JacobianField(_diff(xp, grid.dx, 0), _diff(xp, grid.dy, 1),
                        _diff(yp, grid.dx, 0), _diff(yp, grid.dy, 1))
    if check:
        jac.check_orientation()
    return jac


def material_tensor(jac: JacobianField) -> MaterialTensor:
    det = jac.det
    if not np.all(det > 0):
        jac.check_orientation()
    e_xx = (jac.j_yy ** 2 + jac.j_xy ** 2) / det
    e_yy = (jac.j_yx ** 2 + jac.j_xx ** 2) / det
    e_xy = (-jac.j_yy * jac.j_yx - jac.j_xy * jac.j_xx) / det
    return MaterialTensor(e_xx, e_xy, e_xy.copy(), e_yy, det)


def tensor_from_map(cmap: CoordinateMap, grid: UniformGrid) -> MaterialTensor:
    return material_tensor(cmap.jacobian(grid))


def transform_source(rho_phys, det_j) -> np.ndarray:
    """Charge density on the computational grid: physical density times det(J)."""
    r = np.asarray(getattr(rho_phys, "values", rho_phys), dtype=float)
    d = np.asarray(getattr(det_j, "values", det_j), dtype=float)
    if r.shape != d.shape:
        raise ValueError(f"grid mismatch: {r.shape} vs {d.shape}")
    return r * d


def physical_field(e_x, e_y, jac: JacobianField) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``(J^T)^-1`` nodewise to a computational-space vector field."""
    det = jac.det
    if not np.all(det != 0):
        raise ValueError("singular Jacobian")
    e_x = np.asarray(e_x, dtype=float)
    e_y = np.asarray(e_y, dtype=float)
    # J^T = [[jxx, jyx], [jxy, jyy]]
    ex_p = (jac.j_yy * e_x - jac.j_yx * e_y) / det
    ey_p = (-jac.j_xy * e_x + jac.j_xx * e_y) / det
    return ex_p, ey_p


def potential_passthrough(phi):
    """The potential is invariant; only the node coordinates change."""
    if isinstance(phi, ScalarField):
        return ScalarField(phi.grid, phi.values.copy())
    return np.array(phi, dtype=float, copy=True)


def export_physical(phi: ScalarField, cmap: CoordinateMap) -> str:
    xp, yp = cmap.physical_nodes(phi.grid)
    return phi.to_csv(xp, yp)


__all__ = [
    "CoordinateMap", "Identity", "Polar", "SinhStretch", "Tabulated", "JacobianField",
    "MaterialTensor", "OrientationError", "map_point", "jacobian_exact", "jacobian_numeric",
    "material_tensor", "tensor_from_map", "transform_source", "physical_field",
    "potential_passthrough", "export_physical", "make_grid",
]
