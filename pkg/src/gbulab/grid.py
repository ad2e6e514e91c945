"""Uniform tensor grid on [-Lx, Lx] x [0, Ly], nodal fields and second-order
finite-difference stencils.

Fields store values in a (ny, nx) array, row-major with y as the outer index.
nx is forced odd so the symmetry line x = 0 is a node.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError

__all__ = [
    "Grid2D",
    "ScalarField",
    "laplacian",
    "gradient",
    "sample",
    "write_csv",
    "write_snapshot",
    "read_snapshot",
    "SNAPSHOT_MAGIC",
]

SNAPSHOT_MAGIC = b"GBU1"
_HEADER = struct.Struct("<4sHHddd")  # magic, nx, ny, Lx, Ly, time (32 bytes)


@dataclass(frozen=True)
class Grid2D:
    Lx: float
    Ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx % 2 == 0:
            raise ConfigurationError(f"nx must be odd (x = 0 must be a node), got {self.nx}")
        if self.nx < 5 or self.ny < 5:
            raise ConfigurationError("grid requires nx, ny >= 5")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ConfigurationError("grid requires Lx, Ly > 0")

    @property
    def hx(self) -> float:
        return 2.0 * self.Lx / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.Ly / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.Lx, self.Lx, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, self.Ly, self.ny)

    def meshgrid(self):
        """(X, Y) arrays of shape (ny, nx)."""
        return np.meshgrid(self.x, self.y)

    @property
    def ix0(self) -> int:
        """Column index of the symmetry line x = 0."""
        return (self.nx - 1) // 2


@dataclass
class ScalarField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.ny, self.grid.nx):
            raise ConfigurationError(
                f"field shape {self.values.shape} != grid shape "
                f"{(self.grid.ny, self.grid.nx)}")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


def _check_finite(f: ScalarField, what: str):
    if not np.all(np.isfinite(f.values)):
        j, i = np.argwhere(~np.isfinite(f.values))[0]
        raise NumericError(f"{what}: non-finite value at node (i={i}, j={j})")


def laplacian(f: ScalarField) -> ScalarField:
    """5-point Laplacian on interior nodes; boundary nodes are set to zero
    (never read under Dirichlet stepping)."""
    _check_finite(f, "laplacian")
    g = f.grid
    u = f.values
    out = np.zeros_like(u)
    out[1:-1, 1:-1] = (
        (u[1:-1, 2:] - 2.0 * u[1:-1, 1:-1] + u[1:-1, :-2]) / g.hx**2
        + (u[2:, 1:-1] - 2.0 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / g.hy**2
    )
    return ScalarField(g, out)


def gradient(f: ScalarField):
    """(f_x, f_y) with central differences inside and second-order one-sided
    3-point differences on the boundary (including u_y at y = 0)."""
    _check_finite(f, "gradient")
    g = f.grid
    u = f.values
    fx = np.empty_like(u)
    fy = np.empty_like(u)
    fx[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2.0 * g.hx)
    fx[:, 0] = (-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2]) / (2.0 * g.hx)
    fx[:, -1] = (3.0 * u[:, -1] - 4.0 * u[:, -2] + u[:, -3]) / (2.0 * g.hx)
    fy[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2.0 * g.hy)
    fy[0, :] = (-3.0 * u[0, :] + 4.0 * u[1, :] - u[2, :]) / (2.0 * g.hy)
    fy[-1, :] = (3.0 * u[-1, :] - 4.0 * u[-2, :] + u[-3, :]) / (2.0 * g.hy)
    return ScalarField(g, fx), ScalarField(g, fy)


def sample(f: ScalarField, x: float, y: float) -> float:
    """Bilinear interpolation of nodal values at (x, y)."""
    g = f.grid
    if not (-g.Lx <= x <= g.Lx and 0.0 <= y <= g.Ly):
        raise DomainError(f"sample point ({x}, {y}) outside the grid rectangle")
    sx = (x + g.Lx) / g.hx
    sy = y / g.hy
    i = min(int(sx), g.nx - 2)
    j = min(int(sy), g.ny - 2)
    tx = sx - i
    ty = sy - j
    u = f.values
    return float(
        (1 - tx) * (1 - ty) * u[j, i]
        + tx * (1 - ty) * u[j, i + 1]
        + (1 - tx) * ty * u[j + 1, i]
        + tx * ty * u[j + 1, i + 1]
    )


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def write_csv(f: ScalarField, path):
    """Row-major CSV with header x,y,value."""
    g = f.grid
    X, Y = g.meshgrid()
    with open(path, "w") as fh:
        fh.write("x,y,value\n")
        for xv, yv, vv in zip(X.ravel(), Y.ravel(), f.values.ravel()):
            fh.write(f"{float(xv)!r},{float(yv)!r},{float(vv)!r}\n")


def write_snapshot(f: ScalarField, path, time: float):
    """Raw little-endian binary snapshot: 32-byte header then f64 values."""
    g = f.grid
    header = _HEADER.pack(SNAPSHOT_MAGIC, g.nx, g.ny, g.Lx, g.Ly, time)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path):
    """Inverse of write_snapshot; returns (ScalarField, time)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ConfigurationError(f"snapshot {path}: truncated header")
    magic, nx, ny, Lx, Ly, time = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ConfigurationError(f"snapshot {path}: bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != nx * ny * 8:
        raise ConfigurationError(f"snapshot {path}: truncated payload")
    values = np.frombuffer(body, dtype="<f8").reshape(ny, nx).copy()
    return ScalarField(Grid2D(Lx=Lx, Ly=Ly, nx=nx, ny=ny), values), time
