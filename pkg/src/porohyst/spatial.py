"""Uniform cell-centered grids with homogeneous Neumann boundaries.

Fields are plain float64 arrays of shape (nx,) in 1D and (nx, ny) in 2D.
The Laplacian uses mirror ghost cells, which makes the zero-flux boundary
condition and exact discrete mass conservation automatic, and is exactly
diagonalised by the discrete cosine modes returned by neumann_eigen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import SpdSolveError


@dataclass(frozen=True)
class Grid:
    dim: int
    nx: int
    lx: float
    ny: int = 1
    ly: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.nx < 3 or (self.dim == 2 and self.ny < 3):
            raise ValueError("at least 3 cells per direction are required")
        if self.lx <= 0.0 or (self.dim == 2 and self.ly <= 0.0):
            raise ValueError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_measure(self) -> float:
        return self.hx if self.dim == 1 else self.hx * self.hy

    @property
    def ncells(self) -> int:
        return self.nx if self.dim == 1 else self.nx * self.ny

    @property
    def shape(self):
        return (self.nx,) if self.dim == 1 else (self.nx, self.ny)

    @property
    def measure(self) -> float:
        return self.lx if self.dim == 1 else self.lx * self.ly

    def cell_centers(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        if self.dim == 1:
            return (x,)
        y = (np.arange(self.ny) + 0.5) * self.hy
        return x, y

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


@dataclass(frozen=True)
class EigenPair:
    index: tuple
    mu: float
    mode: np.ndarray


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    """3-point (1D) or 5-point (2D) stencil with mirror ghost cells."""
    if grid.dim == 1:
        return kernels.laplacian_1d(np.ascontiguousarray(f, dtype=float), grid.hx)
    return kernels.laplacian_2d(np.ascontiguousarray(f, dtype=float), grid.hx, grid.hy)


def integrate(grid: Grid, f: np.ndarray) -> float:
    return float(np.sum(f)) * grid.cell_measure


def inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    return float(np.dot(f.ravel(), g.ravel())) * grid.cell_measure


def gradient_energy(grid: Grid, f: np.ndarray) -> float:
    """(1/2) integral of |grad f|^2 over interior faces.

    Satisfies the summation-by-parts identity
    gradient_energy(f) = -(1/2) <f, laplacian(f)>.
    """
    hx = grid.hx
    if grid.dim == 1:
        d = np.diff(f)
        return 0.5 * float(np.sum(d * d)) / hx
    hy = grid.hy
    dx = np.diff(f, axis=0)
    dy = np.diff(f, axis=1)
    return 0.5 * (float(np.sum(dx * dx)) * hy / hx + float(np.sum(dy * dy)) * hx / hy)


def _mode_1d(n: int, length: float, k: int) -> tuple[float, np.ndarray]:
    h = length / n
    if k == 0:
        return 0.0, np.full(n, 1.0 / np.sqrt(length))
    mode = np.cos(k * np.pi * (np.arange(n) + 0.5) / n) * np.sqrt(2.0 / length)
    mu = 2.0 * (1.0 - np.cos(k * np.pi / n)) / (h * h)
    return mu, mode


def neumann_eigen(grid: Grid, k) -> EigenPair:
    """Discrete Neumann eigenpair; k is an int (1D) or an (kx, ky) pair (2D).

    Modes are orthonormal for the cell-measure inner product and satisfy
    laplacian(mode) = -mu * mode exactly.
    """
    if grid.dim == 1:
        k = int(k)
        if not 0 <= k < grid.nx:
            raise ValueError(f"mode index {k} out of range [0, {grid.nx})")
        mu, mode = _mode_1d(grid.nx, grid.lx, k)
        return EigenPair((k,), mu, mode)
    kx, ky = (int(k[0]), int(k[1])) if np.iterable(k) else (int(k), 0)
    if not (0 <= kx < grid.nx and 0 <= ky < grid.ny):
        raise ValueError(f"mode index {(kx, ky)} out of range")
    mux, mx = _mode_1d(grid.nx, grid.lx, kx)
    muy, my = _mode_1d(grid.ny, grid.ly, ky)
    return EigenPair((kx, ky), mux + muy, np.outer(mx, my))


def first_nonzero_eigenvalue(grid: Grid) -> float:
    if grid.dim == 1:
        return neumann_eigen(grid, 1).mu
    return min(neumann_eigen(grid, (1, 0)).mu, neumann_eigen(grid, (0, 1)).mu)


def stencil_diagonal(grid: Grid) -> np.ndarray:
    """Diagonal of the -laplacian stencil (for Jacobi preconditioning)."""
    if grid.dim == 1:
        d = np.full(grid.nx, 2.0) / grid.hx**2
        d[0] = d[-1] = 1.0 / grid.hx**2
        return d
    dx = np.full(grid.nx, 2.0)
    dx[0] = dx[-1] = 1.0
    dy = np.full(grid.ny, 2.0)
    dy[0] = dy[-1] = 1.0
    return dx[:, None] / grid.hx**2 + dy[None, :] / grid.hy**2


def spd_solve(grid, diag, tau, rhs, tol=1e-12, max_iter=5000):
    """Solve diag * v - tau * laplacian(v) = rhs by preconditioned CG.

    The operator is symmetric positive definite for diag > 0 and tau >= 0.
    Jacobi preconditioning; deterministic for fixed inputs.  Raises
    SpdSolveError when the relative residual does not reach tol within
    max_iter iterations.
    """
    diag = np.asarray(diag, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    rhs_norm = float(np.linalg.norm(rhs.ravel()))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs)

    def apply_op(v):
        return diag * v - tau * laplacian(grid, v)

    precond = diag + tau * stencil_diagonal(grid)
    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = r / precond
    p = z.copy()
    rz = float(np.dot(r.ravel(), z.ravel()))
    target = tol * rhs_norm
    for _ in range(max_iter):
        ap = apply_op(p)
        pap = float(np.dot(p.ravel(), ap.ravel()))
        if pap <= 0.0:
            raise SpdSolveError("operator lost positive definiteness", residual=np.nan)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rnorm = float(np.linalg.norm(r.ravel()))
        if rnorm <= target:
            return x
        z = r / precond
        rz_new = float(np.dot(r.ravel(), z.ravel()))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SpdSolveError(
        f"inner solve stalled at relative residual {rnorm / rhs_norm:.3e}",
        residual=rnorm / rhs_norm,
    )
