"""Uniform computational grids, boundary specifications and error norms."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

EDGES = ("west", "east", "south", "north")


@dataclass(frozen=True)
class UniformGrid:
    """Node-centred, boundary-inclusive lattice.

    Node ``(i, j)`` sits at ``(x_min + i*dx, y_min + j*dy)``; arrays on the
    grid have shape ``(nx, ny)`` so that ``phi[i, j]`` follows the x index
    first.
    """

    nx: int
    ny: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 nodes per axis, got {self.nx}x{self.ny}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("degenerate grid extents")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def extents(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def max_levels(self) -> int:
        """Largest multigrid depth this grid supports (coarsest >= 3 nodes)."""
        levels = 1
        nx, ny = self.nx - 1, self.ny - 1
        while nx % 2 == 0 and ny % 2 == 0 and nx // 2 >= 2 and ny // 2 >= 2:
            nx //= 2
            ny //= 2
            levels += 1
        return levels

    def coarsen(self) -> "UniformGrid":
        if (self.nx - 1) % 2 or (self.ny - 1) % 2:
            raise ValueError(f"grid {self.nx}x{self.ny} cannot be coarsened 2:1")
        return UniformGrid((self.nx - 1) // 2 + 1, (self.ny - 1) // 2 + 1, *self.extents)

    def edge_nodes(self, edge: str) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays ``(i, j)`` of the nodes along one edge, corners included."""
        if edge == "west":
            return np.zeros(self.ny, dtype=int), np.arange(self.ny)
        if edge == "east":
            return np.full(self.ny, self.nx - 1), np.arange(self.ny)
        if edge == "south":
            return np.arange(self.nx), np.zeros(self.nx, dtype=int)
        if edge == "north":
            return np.arange(self.nx), np.full(self.nx, self.ny - 1)
        raise ValueError(f"unknown edge {edge!r}")

    def edge_coordinate(self, edge: str) -> np.ndarray:
        return self.y if edge in ("west", "east") else self.x

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = True
        m[:, 0] = m[:, -1] = True
        return m

    def index_of(self, x: float, y: float, atol: float = 1e-9) -> tuple[int, int]:
        """Node index at ``(x, y)``; raises if the point is not on a node."""
        fi = (x - self.x_min) / self.dx
        fj = (y - self.y_min) / self.dy
        i, j = int(round(fi)), int(round(fj))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"point ({x}, {y}) lies outside the grid")
        if abs(fi - i) > atol or abs(fj - j) > atol:
            raise ValueError(f"point ({x}, {y}) is not a grid node")
        return i, j


def make_grid(nx: int, ny: int, extents: Sequence[float]) -> UniformGrid:
    x_min, x_max, y_min, y_max = (float(v) for v in extents)
    return UniformGrid(int(nx), int(ny), x_min, x_max, y_min, y_max)


@dataclass
class ScalarField:
    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def to_csv(self, xcoords: np.ndarray | None = None, ycoords: np.ndarray | None = None) -> str:
        """Serialise as ``x,y,value`` rows; coordinates default to the grid nodes."""
        g = self.grid
        if xcoords is None or ycoords is None:
            xcoords, ycoords = g.mesh()
        buf = io.StringIO()
        buf.write(f"# {g.nx},{g.ny},{g.x_min!r},{g.x_max!r},{g.y_min!r},{g.y_max!r}\n")
        buf.write("x,y,value\n")
        rows = np.column_stack([np.ravel(xcoords), np.ravel(ycoords), self.values.ravel()])
        for x, y, v in rows.tolist():
            buf.write(f"{x!r},{y!r},{v!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ScalarField":
        grid, cols = read_grid_csv(text)
        return cls(grid, cols[:, 2].reshape(grid.shape))


def read_grid_csv(text: str) -> tuple[UniformGrid, np.ndarray]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing '# nx,ny,x_min,x_max,y_min,y_max' header")
    parts = lines[0][1:].split(",")
    grid = make_grid(int(parts[0]), int(parts[1]), [float(p) for p in parts[2:6]])
    body = [ln for ln in lines[1:] if ln and not ln[0].isalpha()]
    cols = np.array([[float(v) for v in ln.split(",")] for ln in body])
    if cols.shape[0] != grid.nx * grid.ny:
        raise ValueError(f"expected {grid.nx * grid.ny} rows, found {cols.shape[0]}")
    return grid, cols


# ---------------------------------------------------------------------------
# boundary conditions

EdgeValue = Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class Dirichlet:
    """Fixed value along an edge.

    ``value`` may be a constant, an array with one entry per edge node, or a
    callable of the computational coordinate running along the edge.
    """

    value: EdgeValue = 0.0

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        v = self.value
        if callable(v):
            out = np.asarray(v(t), dtype=float)
        else:
            out = np.asarray(v, dtype=float)
        return np.broadcast_to(out, t.shape).astype(float)


@dataclass(frozen=True)
class NeumannZero:
    pass


@dataclass
class BoundarySpec:
    """Per-edge conditions plus optional embedded interior Dirichlet nodes."""

    edges: Mapping[str, Dirichlet | NeumannZero]
    embedded_mask: np.ndarray | None = None
    embedded_values: np.ndarray | None = None

    def __post_init__(self):
        missing = set(EDGES) - set(self.edges)
        extra = set(self.edges) - set(EDGES)
        if missing or extra:
            raise ValueError(f"boundary spec needs exactly the edges {EDGES}")
        if self.embedded_mask is not None:
            self.embedded_mask = np.asarray(self.embedded_mask, dtype=bool)
            m = self.embedded_mask
            if m[0, :].any() or m[-1, :].any() or m[:, 0].any() or m[:, -1].any():
                raise ValueError("embedded mask must not touch the outer boundary")
            if self.embedded_values is None:
                self.embedded_values = np.zeros(m.shape)
            else:
                self.embedded_values = np.broadcast_to(
                    np.asarray(self.embedded_values, dtype=float), m.shape).copy()

    @classmethod
    def all_dirichlet(cls, value: EdgeValue = 0.0, **kw) -> "BoundarySpec":
        return cls({e: Dirichlet(value) for e in EDGES}, **kw)

    def is_dirichlet(self, edge: str) -> bool:
        return isinstance(self.edges[edge], Dirichlet)

    def homogeneous(self, mask: np.ndarray | None = None) -> "BoundarySpec":
        """Same edge types with zero data; used for correction problems."""
        edges = {e: Dirichlet(0.0) if self.is_dirichlet(e) else NeumannZero() for e in EDGES}
        return BoundarySpec(edges, mask, None if mask is None else np.zeros(mask.shape))


# ---------------------------------------------------------------------------
# error norms


@dataclass(frozen=True)
class ErrorNorms:
    l_inf: float
    l2: float
    l1: float


def error_norms(numerical, exact) -> ErrorNorms:
    """Max, root-mean-square and mean absolute difference over all nodes."""
    a = np.asarray(getattr(numerical, "values", numerical), dtype=float)
    b = np.asarray(getattr(exact, "values", exact), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")
    d = np.abs(a - b)
    n = d.size
    return ErrorNorms(float(d.max()), float(np.sqrt(np.sum(d * d) / n)), float(np.sum(d) / n))


def convergence_slope(pairs: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(error) against log(dx)."""
    if len(pairs) < 3:
        raise ValueError("need at least 3 (dx, error) pairs")
    arr = np.asarray(pairs, dtype=float)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("dx and error values must be positive")
    slope, _ = np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 1]), 1)
    return float(slope)
