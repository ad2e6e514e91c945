"""Hot stencil kernels for the explicit integrator.

Numba-compiled when available; a numpy fallback keeps the package importable
without a working compiler (set GBULAB_NO_NUMBA=1 to force it).  Kernels are
deliberately serial so repeated runs are bit-reproducible.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = ["rhs_interior", "grad_norm_max", "rhs_interior_1d", "grad_max_1d"]


def _np_rhs_interior(u, hx, hy, ph, out):
    c = u[1:-1, 1:-1]
    lap = (u[1:-1, 2:] - 2.0 * c + u[1:-1, :-2]) / hx**2 \
        + (u[2:, 1:-1] - 2.0 * c + u[:-2, 1:-1]) / hy**2
    gx = (u[1:-1, 2:] - u[1:-1, :-2]) / (2.0 * hx)
    gy = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * hy)
    out[1:-1, 1:-1] = lap + (gx * gx + gy * gy) ** ph


def _np_grad_norm_max(u, hx, hy):
    fx = np.empty_like(u)
    fy = np.empty_like(u)
    fx[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2.0 * hx)
    fx[:, 0] = (-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2]) / (2.0 * hx)
    fx[:, -1] = (3.0 * u[:, -1] - 4.0 * u[:, -2] + u[:, -3]) / (2.0 * hx)
    fy[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2.0 * hy)
    fy[0, :] = (-3.0 * u[0, :] + 4.0 * u[1, :] - u[2, :]) / (2.0 * hy)
    fy[-1, :] = (3.0 * u[-1, :] - 4.0 * u[-2, :] + u[-3, :]) / (2.0 * hy)
    return float(np.sqrt(np.max(fx * fx + fy * fy)))


def _np_rhs_interior_1d(u, hy, ph, out):
    lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / hy**2
    gy = (u[2:] - u[:-2]) / (2.0 * hy)
    out[1:-1] = lap + (gy * gy) ** ph


def _np_grad_max_1d(u, hy):
    gy = np.empty_like(u)
    gy[1:-1] = (u[2:] - u[:-2]) / (2.0 * hy)
    gy[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * hy)
    gy[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * hy)
    return float(np.max(np.abs(gy)))


_USE_NUMBA = os.environ.get("GBULAB_NO_NUMBA", "") != "1"

if _USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        _USE_NUMBA = False

if _USE_NUMBA:

    @numba.njit(cache=True, fastmath=True)
    def _rhs_p3(u, hx, hy, out):
        ny, nx = u.shape
        cx = 1.0 / (hx * hx)
        cy = 1.0 / (hy * hy)
        ax = 0.5 / hx
        ay = 0.5 / hy
        for j in range(1, ny - 1):
            for i in range(1, nx - 1):
                lap = (u[j, i + 1] - 2.0 * u[j, i] + u[j, i - 1]) * cx \
                    + (u[j + 1, i] - 2.0 * u[j, i] + u[j - 1, i]) * cy
                gx = (u[j, i + 1] - u[j, i - 1]) * ax
                gy = (u[j + 1, i] - u[j - 1, i]) * ay
                g2 = gx * gx + gy * gy
                out[j, i] = lap + g2 * math.sqrt(g2)

    @numba.njit(cache=True, fastmath=True)
    def _rhs_pow(u, hx, hy, ph, out):
        ny, nx = u.shape
        cx = 1.0 / (hx * hx)
        cy = 1.0 / (hy * hy)
        ax = 0.5 / hx
        ay = 0.5 / hy
        for j in range(1, ny - 1):
            for i in range(1, nx - 1):
                lap = (u[j, i + 1] - 2.0 * u[j, i] + u[j, i - 1]) * cx \
                    + (u[j + 1, i] - 2.0 * u[j, i] + u[j - 1, i]) * cy
                gx = (u[j, i + 1] - u[j, i - 1]) * ax
                gy = (u[j + 1, i] - u[j - 1, i]) * ay
                g2 = gx * gx + gy * gy
                out[j, i] = lap + g2**ph

    @numba.njit(cache=True)
    def rhs_interior(u, hx, hy, ph, out):  # noqa: F811
        # ph = p/2; the cubic case p = 3 dominates and avoids the slow pow
        if ph == 1.5:
            _rhs_p3(u, hx, hy, out)
        else:
            _rhs_pow(u, hx, hy, ph, out)

    @numba.njit(cache=True)
    def grad_norm_max(u, hx, hy):  # noqa: F811
        ny, nx = u.shape
        ax = 0.5 / hx
        ay = 0.5 / hy
        m = 0.0
        for j in range(ny):
            for i in range(nx):
                if i == 0:
                    gx = (-3.0 * u[j, 0] + 4.0 * u[j, 1] - u[j, 2]) * ax
                elif i == nx - 1:
                    gx = (3.0 * u[j, nx - 1] - 4.0 * u[j, nx - 2] + u[j, nx - 3]) * ax
                else:
                    gx = (u[j, i + 1] - u[j, i - 1]) * ax
                if j == 0:
                    gy = (-3.0 * u[0, i] + 4.0 * u[1, i] - u[2, i]) * ay
                elif j == ny - 1:
                    gy = (3.0 * u[ny - 1, i] - 4.0 * u[ny - 2, i] + u[ny - 3, i]) * ay
                else:
                    gy = (u[j + 1, i] - u[j - 1, i]) * ay
                g2 = gx * gx + gy * gy
                if g2 > m:
                    m = g2
        return math.sqrt(m)

    @numba.njit(cache=True)
    def rhs_interior_1d(u, hy, ph, out):  # noqa: F811
        n = u.shape[0]
        cy = 1.0 / (hy * hy)
        ay = 0.5 / hy
        mode = 0
        if ph == 1.5:
            mode = 1
        elif ph == 1.25:
            mode = 2
        for j in range(1, n - 1):
            lap = (u[j + 1] - 2.0 * u[j] + u[j - 1]) * cy
            gy = (u[j + 1] - u[j - 1]) * ay
            g2 = gy * gy
            if mode == 1:
                src = g2 * math.sqrt(g2)
            elif mode == 2:
                src = g2 * math.sqrt(math.sqrt(g2))
            else:
                src = g2**ph
            out[j] = lap + src

    @numba.njit(cache=True)
    def grad_max_1d(u, hy):  # noqa: F811
        n = u.shape[0]
        ay = 0.5 / hy
        m = abs(-3.0 * u[0] + 4.0 * u[1] - u[2]) * ay
        m2 = abs(3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) * ay
        if m2 > m:
            m = m2
        for j in range(1, n - 1):
            g = abs(u[j + 1] - u[j - 1]) * ay
            if g > m:
                m = g
        return m

else:  # pragma: no cover - exercised only without numba
    rhs_interior = _np_rhs_interior
    grad_norm_max = _np_grad_norm_max
    rhs_interior_1d = _np_rhs_interior_1d
    grad_max_1d = _np_grad_max_1d
