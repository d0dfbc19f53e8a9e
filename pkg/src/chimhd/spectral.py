"""Constant-coefficient modal solvers used as Krylov preconditioners.

Every operator the stepper assembles is, up to variable coefficients, a sum
of 1D second-difference operators along the two axes.  Those 1D pieces are
small symmetric tridiagonal matrices (Neumann at cell centers, Dirichlet at
interior face lines, and the ghost-doubled wall variant for tangential
derivatives), so each separable constant-coefficient operator
diagonalizes exactly in the tensor basis of their eigenvectors.  Applying
such an inverse costs four small dense matrix products, which makes these
ideal preconditioners: exact for uniform material parameters, spectrally
equivalent otherwise.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .grid import GridSpec


def _tridiag_eigh(diag: np.ndarray, off: float):
    n = diag.size
    T = np.diag(diag) + off * (np.eye(n, k=1) + np.eye(n, k=-1))
    w, U = np.linalg.eigh(T)
    return w, U


def _neumann_1d(n: int, h: float):
    """Cell-centered second difference with mirrored (Neumann) ends."""
    d = np.full(n, 2.0 / h**2)
    d[0] = d[-1] = 1.0 / h**2
    return _tridiag_eigh(d, -1.0 / h**2)


def _dirichlet_1d(n: int, h: float):
    """Second difference on interior face lines with zero end values."""
    return _tridiag_eigh(np.full(n, 2.0 / h**2), -1.0 / h**2)


def _wall_1d(n: int, h: float):
    """Second difference with the ghost-doubled no-slip wall closure."""
    d = np.full(n, 2.0 / h**2)
    d[0] = d[-1] = 5.0 / h**2
    return _tridiag_eigh(d, -1.0 / h**2)


class ModalSolver:
    """Inverse of shift + (Lx (x) I + I (x) Ly) applied via eigenbases."""

    def __init__(self, wx, Ux, wy, Uy):
        self.Ux, self.Uy = Ux, Uy
        self.lam = wx[:, None] + wy[None, :]

    def solve(self, rhs2d: np.ndarray, shift: float, scale: float = 1.0,
              drop_nullspace: bool = False) -> np.ndarray:
        """Solve (shift + scale * L) x = rhs; optionally zero the lowest mode
        (pure-Neumann pseudo-inverse)."""
        den = shift + scale * self.lam
        rhat = self.Ux.T @ rhs2d @ self.Uy
        if drop_nullspace:
            safe = np.where(np.abs(den) < 1e-12, 1.0, den)
            rhat = np.where(np.abs(den) < 1e-12, 0.0, rhat / safe)
        else:
            rhat = rhat / den
        return self.Ux @ rhat @ self.Uy.T


@lru_cache(maxsize=None)
def cell_solver(grid: GridSpec) -> ModalSolver:
    """Modal solver for the Neumann cell Laplacian (grad^T grad)."""
    wx, Ux = _neumann_1d(grid.nx, grid.hx)
    wy, Uy = _neumann_1d(grid.ny, grid.hy)
    return ModalSolver(wx, Ux, wy, Uy)


@lru_cache(maxsize=None)
def xface_velocity_solver(grid: GridSpec) -> ModalSolver:
    """Modal solver for the decoupled x-velocity viscous block
    2 dxx (Dirichlet on interior faces) + dyy (ghost-doubled walls)."""
    wx, Ux = _dirichlet_1d(grid.nx - 1, grid.hx)
    wy, Uy = _wall_1d(grid.ny, grid.hy)
    return ModalSolver(2.0 * wx, Ux, wy, Uy)


@lru_cache(maxsize=None)
def yface_velocity_solver(grid: GridSpec) -> ModalSolver:
    wx, Ux = _wall_1d(grid.nx, grid.hx)
    wy, Uy = _dirichlet_1d(grid.ny - 1, grid.hy)
    return ModalSolver(wx, Ux, 2.0 * wy, Uy)


class PhasePreconditioner:
    """Exact inverse of the constant-coefficient phase/potential block system

        [[ gamma*eps*L + gamma*S/eps,  -I        ],
         [ -I,                         -dt*cbar*L ]]

    applied modewise (each Laplacian eigenmode gives a 2x2 system)."""

    def __init__(self, grid: GridSpec, gamma: float, eps: float, s_stab: float,
                 dt: float, cbar: float):
        ms = cell_solver(grid)
        self.Ux, self.Uy = ms.Ux, ms.Uy
        self.shape = (grid.nx, grid.ny)
        bhat = gamma * eps * ms.lam + gamma * s_stab / eps
        ahat = dt * cbar * ms.lam
        det = -(bhat * ahat + 1.0)
        self._m11 = -ahat / det
        self._m12 = 1.0 / det
        self._m22 = bhat / det

    def __call__(self, r: np.ndarray) -> np.ndarray:
        n = self.shape[0] * self.shape[1]
        R1 = self.Ux.T @ r[:n].reshape(self.shape) @ self.Uy
        R2 = self.Ux.T @ r[n:].reshape(self.shape) @ self.Uy
        X1 = self._m11 * R1 + self._m12 * R2
        X2 = self._m12 * R1 + self._m22 * R2
        out1 = self.Ux @ X1 @ self.Uy.T
        out2 = self.Ux @ X2 @ self.Uy.T
        return np.concatenate([out1.ravel(), out2.ravel()])


class StokesPreconditioner:
    """Block upper-triangular preconditioner for the velocity/pressure saddle.

    Pressure block: Cahouet-Chabard (eta_bar + (1/dt) * Neumann-Laplacian
    pseudo-inverse); velocity block: exact constant-viscosity separable
    solve with the node shear coupling dropped.
    """

    def __init__(self, grid: GridSpec, dt: float, eta_bar: float,
                 grad_int, div_weight: float):
        self.grid = grid
        self.dt = dt
        self.eta = eta_bar
        self.G = grad_int  # interior faces x cells
        self.omega = div_weight
        self.solver_u = xface_velocity_solver(grid)
        self.solver_v = yface_velocity_solver(grid)
        self.solver_p = cell_solver(grid)
        self.nxu = (grid.nx - 1) * grid.ny
        self.nyv = grid.nx * (grid.ny - 1)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        g = self.grid
        nfi = self.nxu + self.nyv
        rp = r[nfi:].reshape(g.nx, g.ny)
        xp = self.eta * rp + (1.0 / self.dt) * self.solver_p.solve(
            rp, 0.0, 1.0, drop_nullspace=True
        )
        xp /= self.omega
        ru = r[:nfi] - self.G @ xp.ravel()
        xu = self.solver_u.solve(
            ru[: self.nxu].reshape(g.nx - 1, g.ny), 1.0 / self.dt, self.eta
        )
        xv = self.solver_v.solve(
            ru[self.nxu :].reshape(g.nx, g.ny - 1), 1.0 / self.dt, self.eta
        )
        return np.concatenate([xu.ravel(), xv.ravel(), xp.ravel()])


class PoissonPreconditioner:
    """Constant-coefficient pseudo-inverse for variable-coefficient Neumann
    Poisson systems (used by the current-potential Schur solve)."""

    def __init__(self, grid: GridSpec, cbar: float):
        self.grid = grid
        self.cbar = cbar
        self.solver = cell_solver(grid)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        out = self.solver.solve(
            r.reshape(self.grid.nx, self.grid.ny), 0.0, self.cbar, drop_nullspace=True
        )
        return out.ravel()
