"""Compiled inner loops. Coefficient slot order: C, E, W, N, S, NE, NW, SE, SW."""

import numpy as np
from numba import njit

OFFSETS = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1))


@njit(cache=True)
def _neighbour_sum(phi, coef, i, j, nx, ny):
    ip = i + 1 if i + 1 < nx else nx - 1
    im = i - 1 if i > 0 else 0
    jp = j + 1 if j + 1 < ny else ny - 1
    jm = j - 1 if j > 0 else 0
    return (coef[i, j, 1] * phi[ip, j] + coef[i, j, 2] * phi[im, j]
            + coef[i, j, 3] * phi[i, jp] + coef[i, j, 4] * phi[i, jm]
            + coef[i, j, 5] * phi[ip, jp] + coef[i, j, 6] * phi[im, jp]
            + coef[i, j, 7] * phi[ip, jm] + coef[i, j, 8] * phi[im, jm])


@njit(cache=True)
def sweep(phi, b, coef, free, omega):
    """One lexicographic Gauss-Seidel/SOR pass (x index outer, y index inner)."""
    nx, ny = phi.shape
    maxdu = 0.0
    for i in range(nx):
        for j in range(ny):
            if not free[i, j]:
                continue
            cand = (_neighbour_sum(phi, coef, i, j, nx, ny) + b[i, j]) / coef[i, j, 0]
            old = phi[i, j]
            if omega == 1.0:
                phi[i, j] = cand
            else:
                phi[i, j] = old + omega * (cand - old)
            du = abs(phi[i, j] - old)
            if du > maxdu:
                maxdu = du
    return maxdu


@njit(cache=True)
def sweeps(phi, b, coef, free, omega, count):
    maxdu = 0.0
    for _ in range(count):
        maxdu = sweep(phi, b, coef, free, omega)
    return maxdu


@njit(cache=True)
def apply_into(phi, coef, free, out):
    nx, ny = phi.shape
    for i in range(nx):
        for j in range(ny):
            if free[i, j]:
                out[i, j] = coef[i, j, 0] * phi[i, j] - _neighbour_sum(phi, coef, i, j, nx, ny)
            else:
                out[i, j] = 0.0


@njit(cache=True)
def residual_into(phi, b, coef, free, out):
    """out = b - A phi on free nodes (0 elsewhere); returns the 2-norm."""
    nx, ny = phi.shape
    acc = 0.0
    for i in range(nx):
        for j in range(ny):
            if free[i, j]:
                r = b[i, j] - (coef[i, j, 0] * phi[i, j] - _neighbour_sum(phi, coef, i, j, nx, ny))
                out[i, j] = r
                acc += r * r
            else:
                out[i, j] = 0.0
    return np.sqrt(acc)
