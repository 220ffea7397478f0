"""Variable-coefficient 9-point discretisation of -div(eps grad phi) and its relaxation.

Sign convention: the continuous problem is ``div(eps grad phi) = rho`` with
``rho`` the transformed source. It is discretised as ``A phi = b`` where
``A = -div(eps grad .)`` (positive diagonal ``k2``) and ``b = -rho``, so the
Gauss-Seidel candidate is ``(sum of weighted neighbours - rho) / k2``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .fields import EDGES, BoundarySpec, Dirichlet, UniformGrid
from .transform import MaterialTensor

FREE, FIXED, SLAVE = 0, 1, 2
_SLOT = {off: k for k, off in enumerate(_kernels.OFFSETS)}


class ConvergenceError(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class StencilCoeffs:
    k1: float
    k2: float
    k3: float
    k4: float
    k5: float
    k6: float


def _k_arrays(e_xx, e_xy, e_yx, e_yy, dx, dy):
    """k1..k6 at every node of ``(nx+2, ny+2)``-padded tensors, returned unpadded."""
    c = (slice(1, -1), slice(1, -1))
    E = (slice(2, None), slice(1, -1))
    W = (slice(None, -2), slice(1, -1))
    N = (slice(1, -1), slice(2, None))
    S = (slice(1, -1), slice(None, -2))
    dxx, dyy, dxy = dx * dx, dy * dy, dx * dy
    ax = (e_xx[E] - e_xx[W]) / (4 * dxx) + (e_yx[N] - e_yx[S]) / (4 * dxy)
    ay = (e_yy[N] - e_yy[S]) / (4 * dyy) + (e_xy[E] - e_xy[W]) / (4 * dxy)
    k1 = e_xx[c] / dxx + ax
    k3 = e_xx[c] / dxx - ax
    k4 = e_yy[c] / dyy + ay
    k5 = e_yy[c] / dyy - ay
    k6 = e_xy[c] / (2 * dxy)
    k2 = 2 * (e_xx[c] / dxx + e_yy[c] / dyy)
    return k1, k2, k3, k4, k5, k6


def stencil_at(tensor: MaterialTensor, i: int, j: int, dx: float, dy: float) -> StencilCoeffs:
    nx, ny = tensor.shape
    if not (1 <= i <= nx - 2 and 1 <= j <= ny - 2):
        raise IndexError(f"node ({i}, {j}) is not an interior node")
    sl = (slice(i - 1, i + 2), slice(j - 1, j + 2))
    ks = _k_arrays(tensor.e_xx[sl], tensor.e_xy[sl], tensor.e_yx[sl], tensor.e_yy[sl], dx, dy)
    k1, k2, k3, k4, k5, k6 = (float(k[0, 0]) for k in ks)
    return StencilCoeffs(k1, k2, k3, k4, k5, k6)


def node_kinds(grid: UniformGrid, bc: BoundarySpec, neumann: str = "copy"):
    """Classify nodes and locate the copy source of every zero-gradient edge node."""
    kind = np.zeros(grid.shape, dtype=np.int8)
    src = {}
    nx, ny = grid.shape
    dirichlet = {e: bc.is_dirichlet(e) for e in EDGES}
    inward = {"west": (1, 0), "east": (-1, 0), "south": (0, 1), "north": (0, -1)}
    for edge in EDGES:
        if dirichlet[edge]:
            continue
        ii, jj = grid.edge_nodes(edge)
        for i, j in zip(ii, jj):
            if neumann == "copy":
                kind[i, j] = SLAVE
                di, dj = inward[edge]
                s = src.get((i, j), (i, j))
                src[(i, j)] = (s[0] + di, s[1] + dj)
    for edge in EDGES:
        if dirichlet[edge]:
            ii, jj = grid.edge_nodes(edge)
            kind[ii, jj] = FIXED
            for i, j in zip(ii, jj):
                src.pop((int(i), int(j)), None)
    if bc.embedded_mask is not None:
        if bc.embedded_mask.shape != grid.shape:
            raise ValueError("embedded mask does not match the grid")
        kind[bc.embedded_mask] = FIXED
    src = {k: v for k, v in src.items() if kind[k] == SLAVE}
    return kind, src


def apply_bc(phi: np.ndarray, bc: BoundarySpec, grid: UniformGrid) -> np.ndarray:
    """Enforce boundary data in place and return ``phi``.

    Zero-gradient edges copy the value one node inward along the normal;
    Dirichlet edges win at corners (south/north first, then west/east); embedded
    mask nodes take their fixed values last.
    """
    kind, src = node_kinds(grid, bc)
    _copy_slaves(phi, src)
    for edge in ("south", "north", "west", "east"):
        cond = bc.edges[edge]
        if isinstance(cond, Dirichlet):
            ii, jj = grid.edge_nodes(edge)
            phi[ii, jj] = cond.evaluate(grid.edge_coordinate(edge))
    if bc.embedded_mask is not None:
        phi[bc.embedded_mask] = bc.embedded_values[bc.embedded_mask]
    return phi


def _copy_slaves(phi, src):
    for (i, j), (si, sj) in src.items():
        phi[i, j] = phi[si, sj]


def _reflect(k, n):
    if k < 0:
        return -k
    if k > n - 1:
        return 2 * (n - 1) - k
    return k


def assemble(grid: UniformGrid, tensor: MaterialTensor, bc: BoundarySpec, neumann: str = "copy"):
    """Per-node 9-slot coefficients with boundary closures folded in."""
    if neumann not in ("copy", "ghost"):
        raise ValueError("neumann must be 'copy' or 'ghost'")
    if tensor.shape != grid.shape:
        raise ValueError("tensor does not match the grid")
    tensor.validate()
    pad = lambda a: np.pad(a, 1, mode="reflect")
    k1, k2, k3, k4, k5, k6 = _k_arrays(pad(tensor.e_xx), pad(tensor.e_xy), pad(tensor.e_yx),
                                       pad(tensor.e_yy), grid.dx, grid.dy)
    coef = np.stack([k2, k1, k3, k4, k5, k6, -k6, -k6, k6], axis=-1)
    kind, src = node_kinds(grid, bc, neumann)
    free = kind == FREE
    coef[~free] = 0.0
    coef[~free, 0] = 1.0

    nx, ny = grid.shape
    ring = np.zeros(grid.shape, dtype=bool)
    ring[:2, :] = ring[-2:, :] = True
    ring[:, :2] = ring[:, -2:] = True
    for i, j in np.argwhere(ring & free):
        for s in range(1, 9):
            c = coef[i, j, s]
            if c == 0.0:
                continue
            di, dj = _kernels.OFFSETS[s]
            ti, tj = i + di, j + dj
            if not (0 <= ti < nx and 0 <= tj < ny):
                ti, tj = _reflect(ti, nx), _reflect(tj, ny)
            elif kind[ti, tj] == SLAVE:
                ti, tj = src[(ti, tj)]
            else:
                continue
            target = _SLOT.get((ti - i, tj - j))
            if target is None:
                raise ValueError(f"boundary closure at ({i}, {j}) reaches outside the stencil")
            coef[i, j, s] = 0.0
            if target == 0:
                coef[i, j, 0] -= c
            else:
                coef[i, j, target] += c
    if np.any(coef[free, 0] <= 0):
        raise ValueError("non-positive diagonal after boundary closure")
    return coef, kind, src


@dataclass
class ProblemInstance:
    """Grid, tensor, transformed source and boundary data of one solvable problem."""

    grid: UniformGrid
    tensor: MaterialTensor
    rho: np.ndarray
    bc: BoundarySpec
    neumann: str = "copy"

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != self.grid.shape:
            raise ValueError("source does not match the grid")

    @cached_property
    def _assembled(self):
        return assemble(self.grid, self.tensor, self.bc, self.neumann)

    @property
    def coef(self) -> np.ndarray:
        return self._assembled[0]

    @property
    def kind(self) -> np.ndarray:
        return self._assembled[1]

    @property
    def slaves(self) -> dict:
        return self._assembled[2]

    @cached_property
    def free(self) -> np.ndarray:
        return self.kind == FREE

    @cached_property
    def rhs(self) -> np.ndarray:
        return np.where(self.free, -self.rho, 0.0)

    @cached_property
    def rhs_norm(self) -> float:
        """2-norm of the full linear system's right-hand side.

        Fixed nodes carry identity rows whose right-hand side is the prescribed
        value, so boundary data counts alongside the source. Falls back to 1
        when everything is zero.
        """
        fixed = np.where(self.kind == FIXED, self.initial_guess(), 0.0)
        n = float(np.sqrt(np.sum(self.rhs ** 2) + np.sum(fixed ** 2)))
        return n if n > 0 else 1.0

    def initial_guess(self) -> np.ndarray:
        return apply_bc(np.zeros(self.grid.shape), self.bc, self.grid)

    def finish(self, phi: np.ndarray) -> np.ndarray:
        _copy_slaves(phi, self.slaves)
        return phi


def _check_phi(phi, inst):
    if phi.shape != inst.grid.shape:
        raise ValueError(f"grid mismatch: {phi.shape} vs {inst.grid.shape}")


def apply_operator(phi: np.ndarray, inst: ProblemInstance) -> np.ndarray:
    phi = np.ascontiguousarray(phi, dtype=float)
    _check_phi(phi, inst)
    out = np.empty_like(phi)
    _kernels.apply_into(phi, inst.coef, inst.free, out)
    return out


def residual(phi: np.ndarray, inst: ProblemInstance, rhs: np.ndarray | None = None) -> np.ndarray:
    phi = np.ascontiguousarray(phi, dtype=float)
    _check_phi(phi, inst)
    out = np.empty_like(phi)
    _kernels.residual_into(phi, inst.rhs if rhs is None else rhs, inst.coef, inst.free, out)
    return out


def residual_norm(phi: np.ndarray, inst: ProblemInstance) -> float:
    return float(_kernels.residual_into(phi, inst.rhs, inst.coef, inst.free, np.empty_like(phi)))


def _check_omega(omega):
    if not (1.0 <= omega < 2.0):
        raise ValueError(f"relaxation factor must lie in [1, 2), got {omega}")


def sor_sweep(phi: np.ndarray, inst: ProblemInstance, omega: float = 1.0) -> float:
    """Relax ``phi`` in place once; returns the largest nodal update."""
    _check_omega(omega)
    _check_phi(phi, inst)
    if phi.dtype != np.float64 or not phi.flags.c_contiguous:
        raise TypeError("phi must be a C-contiguous float64 array (updated in place)")
    du = _kernels.sweep(phi, inst.rhs, inst.coef, inst.free, float(omega))
    _copy_slaves(phi, inst.slaves)
    return float(du)


@dataclass
class SolveResult:
    phi: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = True
    wall_time: float = 0.0

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else 0.0

    def summary(self) -> dict:
        return {"iterations": self.iterations, "final_residual": self.final_residual,
                "converged": self.converged, "wall_time_s": self.wall_time}


def sor_solve(inst: ProblemInstance, omega: float = 1.875, tol: float = 1e-10,
              max_iters: int = 200_000, check_every: int = 10, criterion: str = "residual",
              phi0: np.ndarray | None = None, stall: int | None = 500) -> SolveResult:
    """Iterate SOR sweeps until the relative residual drops below ``tol``.

    The residual is measured relative to ``inst.rhs_norm``, the norm of the
    full system's right-hand side. ``criterion="update"`` instead stops on the
    largest nodal change between sweeps.

    If the best residual has not improved by 1% over ``stall`` consecutive
    checks the iteration has hit its round-off floor and gives up early;
    ``stall=None`` disables this.
    """
    _check_omega(omega)
    if criterion not in ("residual", "update"):
        raise ValueError("criterion must be 'residual' or 'update'")
    phi = inst.initial_guess() if phi0 is None else np.array(phi0, dtype=float)
    b, coef, free = inst.rhs, inst.coef, inst.free
    scratch = np.empty_like(phi)
    ref = inst.rhs_norm
    t0 = time.perf_counter()
    rel = _kernels.residual_into(phi, b, coef, free, scratch) / ref
    history = [rel]
    it = 0
    du = np.inf
    best, since = rel, 0
    while rel > tol and it < max_iters and (stall is None or since < stall):
        n = min(check_every, max_iters - it)
        du = _kernels.sweeps(phi, b, coef, free, float(omega), n)
        it += n
        rel = _kernels.residual_into(phi, b, coef, free, scratch) / ref
        history.append(rel)
        if criterion == "update" and du <= tol:
            break
        if rel < 0.99 * best:
            best, since = rel, 0
        else:
            since += 1
    wall = time.perf_counter() - t0
    inst.finish(phi)
    done = rel <= tol or (criterion == "update" and du <= tol)
    result = SolveResult(phi, it, history, bool(done), wall)
    if not done:
        why = f"stagnated after {it} sweeps" if it < max_iters else f"did not converge in {max_iters} sweeps"
        raise ConvergenceError(f"SOR {why} (relative residual {rel:.3e})", result)
    return result
