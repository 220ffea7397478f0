"""Analytic benchmark problems, resolution scans and MG/SOR timing comparisons."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .discrete import ConvergenceError, ProblemInstance, SolveResult, sor_solve
from .fields import BoundarySpec, Dirichlet, NeumannZero, UniformGrid, convergence_slope, error_norms, make_grid
from .gridgen import SquareToCircle, boundary_trace, generate_map
from .multigrid import build_hierarchy, mg_solve
from .transform import CoordinateMap, Polar, Tabulated, tensor_from_map, transform_source


@dataclass
class BenchmarkCase:
    name: str
    grid: UniformGrid
    cmap: CoordinateMap
    bc: BoundarySpec
    rho_phys: np.ndarray
    exact: Callable[[np.ndarray, np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    def physical_nodes(self):
        return self.cmap.physical_nodes(self.grid)

    def exact_field(self) -> np.ndarray:
        return self.exact(*self.physical_nodes())

    def instance(self, neumann: str = "ghost") -> ProblemInstance:
        tensor = tensor_from_map(self.cmap, self.grid)
        rho = transform_source(self.rho_phys, tensor.det_j)
        return ProblemInstance(self.grid, tensor, rho, self.bc, neumann)


def semi_annulus_case(a: float = 2.0, R: float = 5.0, phi0: float = 1.0, n: int = 201) -> BenchmarkCase:
    """Region between two concentric half circles; inner wall at phi0, outer wall grounded."""
    if not 0 < a < R:
        raise ValueError("need 0 < a < R")
    grid = make_grid(n, n, [a, R, 0.0, np.pi])
    bc = BoundarySpec({"west": Dirichlet(phi0), "east": Dirichlet(0.0),
                       "south": NeumannZero(), "north": NeumannZero()})

    def exact(xp, yp):
        return phi0 * np.log(R / np.hypot(xp, yp)) / np.log(R / a)

    return BenchmarkCase("semi_annulus", grid, Polar(), bc, np.zeros(grid.shape), exact,
                         {"a": a, "R": R, "phi0": phi0, "n": n})


@lru_cache(maxsize=16)
def circle_map(b: float, n: int, tol: float = 1e-10) -> Tabulated:
    """Numerically generated square [-b, b]^2 -> disk of radius b map (cached)."""
    grid = make_grid(n, n, [-b, b, -b, b])
    return generate_map(boundary_trace(SquareToCircle(b), grid), grid, tol=tol)


def _boundary_from_exact(grid, xp, yp, fn):
    edges = {}
    for edge in ("west", "east", "south", "north"):
        ii, jj = grid.edge_nodes(edge)
        edges[edge] = Dirichlet(fn(xp[ii, jj], yp[ii, jj]))
    return BoundarySpec(edges)


def circle_poisson_case(b: float = 2.0, n: int = 257) -> BenchmarkCase:
    """Unit source in a disk of radius b; potential b^2/4 on the rim."""
    cmap = circle_map(float(b), int(n))
    grid = cmap.grid
    bc = BoundarySpec.all_dirichlet(b * b / 4.0)

    def exact(xp, yp):
        return (xp ** 2 + yp ** 2) / 4.0

    return BenchmarkCase("circle_poisson", grid, cmap, bc, np.ones(grid.shape), exact, {"b": b, "n": n})


def circle_laplace_case(b: float = 1.0, n_mode: int = 8, n: int = 257) -> BenchmarkCase:
    """Harmonic r^n sin(n theta) in a disk, driven by sin(n theta) on the rim."""
    if n_mode < 1:
        raise ValueError("n_mode must be >= 1")
    cmap = circle_map(float(b), int(n))
    grid = cmap.grid
    xp, yp = cmap.physical_nodes(grid)

    def rim(x, y):
        return np.sin(n_mode * np.arctan2(y, x))

    def exact(x, y):
        return (np.hypot(x, y) / b) ** n_mode * np.sin(n_mode * np.arctan2(y, x))

    bc = _boundary_from_exact(grid, xp, yp, rim)
    return BenchmarkCase("circle_laplace", grid, cmap, bc, np.zeros(grid.shape), exact,
                         {"b": b, "n_mode": n_mode, "n": n})


CASES = {
    "semi_annulus": semi_annulus_case,
    "circle_poisson": circle_poisson_case,
    "circle_laplace": circle_laplace_case,
}


def make_case(name: str, n: int | None = None, **params) -> BenchmarkCase:
    try:
        factory = CASES[name]
    except KeyError:
        raise ValueError(f"unknown benchmark case {name!r}; choose from {sorted(CASES)}") from None
    if n is not None:
        params["n"] = n
    return factory(**params)


@dataclass
class SolverOptions:
    tol: float = 1e-10
    omega: float = 1.875
    levels: int | None = None
    nu1: int = 3
    nu2: int = 3
    coarse_sweeps: int = 50
    omega_smooth: float = 1.0
    max_cycles: int = 200
    max_iters: int = 500_000
    neumann: str = "ghost"


def prepare(case: BenchmarkCase, solver: str, opts: SolverOptions):
    inst = case.instance(opts.neumann)
    inst.coef  # assemble outside any timed region
    if solver == "mg":
        return build_hierarchy(inst, case.cmap, opts.levels, opts.nu1, opts.nu2,
                               opts.coarse_sweeps, opts.omega_smooth)
    if solver == "sor":
        return inst
    raise ValueError(f"unknown solver {solver!r}")


def run_prepared(prepared, solver: str, opts: SolverOptions) -> SolveResult:
    if solver == "mg":
        for lv in prepared.levels:
            lv.coef
        return mg_solve(prepared, tol=opts.tol, max_cycles=opts.max_cycles)
    return sor_solve(prepared, omega=opts.omega, tol=opts.tol, max_iters=opts.max_iters)


def timed_solve(case: BenchmarkCase, solver: str, opts: SolverOptions) -> tuple[float, int, bool]:
    """Solve-only wall time, iteration count and whether ``opts.tol`` was reached.

    A solver that stops short of the tolerance reports the time it spent, which
    is then a lower bound on its time to tolerance.
    """
    prepared = prepare(case, solver, opts)
    try:
        res = run_prepared(prepared, solver, opts)
    except ConvergenceError as err:
        res = err.result
    return res.wall_time, res.iterations, res.converged


def solve_case(case: BenchmarkCase, solver: str = "mg", opts: SolverOptions | None = None) -> SolveResult:
    opts = opts or SolverOptions()
    return run_prepared(prepare(case, solver, opts), solver, opts)


def run_convergence_study(case_name: str, resolutions, solver: str = "mg",
                          opts: SolverOptions | None = None, **params) -> dict:
    """Solve at each resolution; return the norm table and fitted slopes."""
    if len(resolutions) < 3:
        raise ValueError("a convergence study needs at least 3 resolutions")
    rows = []
    for n in resolutions:
        case = make_case(case_name, n=n, **params)
        res = solve_case(case, solver, opts)
        norms = error_norms(res.phi, case.exact_field())
        rows.append({"N": n, "dx": case.grid.dx, "l1": norms.l1, "l2": norms.l2,
                     "linf": norms.l_inf, "iterations": res.iterations})
    slopes = {k: convergence_slope([(r["dx"], r[k]) for r in rows]) for k in ("l1", "l2", "linf")}
    return {"case": case_name, "solver": solver, "rows": rows, "slopes": slopes}


def run_timing_comparison(case_name: str, resolutions, repeats: int = 3,
                          opts: SolverOptions | None = None, **params) -> list[dict]:
    """Median solve-only wall time of MG and SOR at each resolution.

    ``mg_converged``/``sor_converged`` flag runs that stopped at a round-off
    floor above the tolerance; their times are lower bounds.
    """
    opts = opts or SolverOptions()
    table = []
    for n in resolutions:
        case = make_case(case_name, n=n, **params)
        row = {"N": n}
        for solver in ("mg", "sor"):
            runs = [timed_solve(case, solver, opts) for _ in range(max(1, repeats))]
            row[f"t_{solver}"] = statistics.median(r[0] for r in runs)
            row["cycles" if solver == "mg" else "iters"] = runs[-1][1]
            row[f"{solver}_converged"] = all(r[2] for r in runs)
        table.append(row)
    return table
