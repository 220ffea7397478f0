"""Geometric multigrid V-cycle on the uniform computational grid.

Coarse operators are rediscretised: every level recomputes its permittivity
tensor from the coordinate map sampled at that level's nodes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .discrete import (ConvergenceError, ProblemInstance, SolveResult, _copy_slaves,
                       residual_norm)
from .transform import CoordinateMap, MaterialTensor, tensor_from_map


def restrict(fine: np.ndarray, boundary: str = "inject") -> np.ndarray:
    """Full weighting (1/4, 1/8, 1/16) at interior coarse nodes.

    Boundary coarse nodes are injected, or with ``boundary="reflect"`` fully
    weighted against mirror images (matches the ghost-node Neumann closure).
    """
    f = np.asarray(getattr(fine, "values", fine), dtype=float)
    nx, ny = f.shape
    if nx % 2 == 0 or ny % 2 == 0 or nx < 3 or ny < 3:
        raise ValueError(f"fine grid {nx}x{ny} must have an odd node count >= 3 per axis")
    if boundary == "reflect":
        return restrict(np.pad(f, 2, mode="reflect"))[1:-1, 1:-1]
    if boundary != "inject":
        raise ValueError("boundary must be 'inject' or 'reflect'")
    c = f[::2, ::2].copy()
    c[1:-1, 1:-1] = (
        0.25 * f[2:-2:2, 2:-2:2]
        + 0.125 * (f[1:-3:2, 2:-2:2] + f[3:-1:2, 2:-2:2] + f[2:-2:2, 1:-3:2] + f[2:-2:2, 3:-1:2])
        + 0.0625 * (f[1:-3:2, 1:-3:2] + f[3:-1:2, 1:-3:2] + f[1:-3:2, 3:-1:2] + f[3:-1:2, 3:-1:2]))
    return c


def prolong(coarse: np.ndarray) -> np.ndarray:
    """Bilinear interpolation onto the 2:1 refined grid."""
    c = np.asarray(getattr(coarse, "values", coarse), dtype=float)
    mx, my = c.shape
    if mx < 2 or my < 2:
        raise ValueError("coarse grid too small to prolong")
    f = np.empty((2 * mx - 1, 2 * my - 1))
    f[::2, ::2] = c
    f[1::2, ::2] = 0.5 * (c[:-1, :] + c[1:, :])
    f[::2, 1::2] = 0.5 * (c[:, :-1] + c[:, 1:])
    f[1::2, 1::2] = 0.25 * (c[:-1, :-1] + c[1:, :-1] + c[:-1, 1:] + c[1:, 1:])
    return f


def _mask_aligned(fine_mask: np.ndarray) -> bool:
    coarse = fine_mask[::2, ::2]
    return np.array_equal(prolong(coarse.astype(float)) == 1.0, fine_mask)


@dataclass
class MultigridHierarchy:
    levels: list
    nu1: int = 3
    nu2: int = 3
    coarse_sweeps: int = 50
    omega_smooth: float = 1.0

    def __post_init__(self):
        if not 1.0 <= self.omega_smooth < 2.0:
            raise ValueError("smoother relaxation factor must lie in [1, 2)")
        if self.nu1 < 0 or self.nu2 < 0 or self.coarse_sweeps < 1:
            raise ValueError("invalid smoothing counts")

    @property
    def finest(self) -> ProblemInstance:
        return self.levels[0]

    def summary(self) -> dict:
        return {
            "levels": len(self.levels),
            "nodes_per_level": [[lv.grid.nx, lv.grid.ny] for lv in self.levels],
            "nu1": self.nu1, "nu2": self.nu2,
            "coarse_sweeps": self.coarse_sweeps, "omega_smooth": self.omega_smooth,
        }


def build_hierarchy(inst: ProblemInstance, cmap: CoordinateMap | None, max_levels: int | None = None,
                    nu1: int = 3, nu2: int = 3, coarse_sweeps: int = 50,
                    omega_smooth: float = 1.0) -> MultigridHierarchy:
    """Level list finest to coarsest.

    With ``max_levels=None`` the depth is as large as the grid divisibility
    and embedded-mask alignment allow. Passing ``cmap=None`` injects the fine
    tensor instead of recomputing it (for problems given without a map).
    """
    grid = inst.grid
    possible = grid.max_levels()
    mask = inst.bc.embedded_mask
    if max_levels is None:
        n = 1
        m = mask
        while n < possible and (m is None or _mask_aligned(m)):
            m = None if m is None else m[::2, ::2]
            n += 1
        max_levels = n
    elif max_levels < 1:
        raise ValueError("max_levels must be >= 1")
    elif max_levels > possible:
        raise ValueError(f"{grid.nx}x{grid.ny} grid supports at most {possible} levels; "
                         f"(n-1) must be divisible by 2^(levels-1)")

    levels = [inst]
    g, m = grid, mask
    stride = 1
    for _ in range(max_levels - 1):
        if m is not None and not _mask_aligned(m):
            raise ValueError(f"embedded mask is not aligned with the {g.nx}x{g.ny} -> coarse mapping")
        g = g.coarsen()
        stride *= 2
        m = None if m is None else m[::2, ::2].copy()
        if cmap is not None:
            tensor = tensor_from_map(cmap, g)
        else:
            t = inst.tensor
            s = (slice(None, None, stride), slice(None, None, stride))
            tensor = MaterialTensor(t.e_xx[s], t.e_xy[s], t.e_yx[s], t.e_yy[s], t.det_j[s])
        levels.append(ProblemInstance(g, tensor, np.zeros(g.shape), inst.bc.homogeneous(m),
                                      inst.neumann))
    return MultigridHierarchy(levels, nu1, nu2, coarse_sweeps, omega_smooth)


def v_cycle(hier: MultigridHierarchy, level: int, phi: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """One V-cycle on ``level``; ``phi`` is updated in place and returned."""
    if not 0 <= level < len(hier.levels):
        raise IndexError(f"level {level} out of range")
    lv = hier.levels[level]
    coef, free, w = lv.coef, lv.free, float(hier.omega_smooth)
    if level == len(hier.levels) - 1:
        _kernels.sweeps(phi, rhs, coef, free, w, hier.coarse_sweeps)
        _copy_slaves(phi, lv.slaves)
        return phi
    if hier.nu1:
        _kernels.sweeps(phi, rhs, coef, free, w, hier.nu1)
    r = np.empty_like(phi)
    _kernels.residual_into(phi, rhs, coef, free, r)
    coarse = hier.levels[level + 1]
    rc = restrict(r, "reflect" if lv.neumann == "ghost" else "inject")
    rc[~coarse.free] = 0.0
    psi = np.zeros_like(rc)
    v_cycle(hier, level + 1, psi, rc)
    corr = prolong(psi)
    corr[~free] = 0.0
    phi += corr
    if hier.nu2:
        _kernels.sweeps(phi, rhs, coef, free, w, hier.nu2)
    _copy_slaves(phi, lv.slaves)
    return phi


def mg_solve(hier: MultigridHierarchy, tol: float = 1e-10, max_cycles: int = 200,
             phi0: np.ndarray | None = None, stall: int = 4) -> SolveResult:
    """Repeat V-cycles until the relative residual is below ``tol``.

    The reference is ``inst.rhs_norm``, the same measure ``sor_solve`` uses.
    Iteration stops early once the residual stagnates at round-off level
    (``stall`` cycles in a row reducing it by less than 10%).
    """
    inst = hier.finest
    phi = inst.initial_guess() if phi0 is None else np.array(phi0, dtype=float)
    rhs = inst.rhs
    ref = inst.rhs_norm
    t0 = time.perf_counter()
    rel = residual_norm(phi, inst) / ref
    history = [rel]
    cycles = 0
    flat = 0
    while rel > tol and cycles < max_cycles and flat < stall:
        v_cycle(hier, 0, phi, rhs)
        cycles += 1
        rel = residual_norm(phi, inst) / ref
        flat = flat + 1 if rel > 0.9 * history[-1] else 0
        history.append(rel)
    wall = time.perf_counter() - t0
    inst.finish(phi)
    result = SolveResult(phi, cycles, history, rel <= tol, wall)
    if rel > tol:
        why = "stagnated" if flat >= stall else f"did not converge in {max_cycles} cycles"
        raise ConvergenceError(f"multigrid {why} (relative residual {rel:.3e})", result)
    return result


def reduction_factors(history) -> np.ndarray:
    h = np.asarray(history, dtype=float)
    return h[1:] / h[:-1]
