"""Sparse assembly helpers and Krylov solvers.

Systems are stored in compressed sparse row form (scipy); the solvers are
hand-rolled so that every solve returns a SolveReport whose residual is the
true relative 2-norm recomputed from the returned iterate, not a recurrence
value.  Conjugate gradients (Jacobi preconditioned) handles the symmetric
positive (semi-)definite solves; restarted GMRES with right diagonal
preconditioning handles the nonsymmetric coupled systems.  The mixed
current/potential saddle system is reduced to a variable-coefficient Poisson
problem for the potential (the current block is face-diagonal), which keeps
the discrete divergence of the recovered current at the solver-residual
level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SolverError
from .grid import (
    CellField,
    FaceField,
    GridSpec,
    div_face_to_cell,
    div_matrix,
    grad_matrix,
    pack_faces,
    unpack_faces,
)
from .spectral import PoissonPreconditioner

# CSR storage (row offsets, column indices, values) is scipy's csr_matrix;
# assembly goes through scipy and solvers only rely on matvec + diagonal.
SparseMatrix = sp.csr_matrix


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool


def _check_system(A, b: np.ndarray) -> None:
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if b.ndim != 1 or b.size != A.shape[0]:
        raise ValueError(f"rhs size {b.size} does not match matrix {A.shape}")


def _preconditioner(A, precond):
    """Normalize the precond argument: None -> Jacobi from the matrix
    diagonal, 1-D array -> diagonal scaling, callable -> used as given."""
    if callable(precond):
        return precond
    d = np.asarray(precond, dtype=float) if precond is not None else A.diagonal()
    d = np.abs(d)
    d[d < 1e-300] = 1.0
    dinv = 1.0 / d
    return lambda r: dinv * r


def cg_solve(
    A: SparseMatrix,
    b: np.ndarray,
    tol: float = 1e-12,
    maxit: int = 10000,
    x0: np.ndarray | None = None,
    precond=None,
    project=None,
) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate gradients for SPD / SPSD systems.

    precond: None for Jacobi, a diagonal vector, or an SPD apply-callable.
    For semi-definite systems the right-hand side must be range-compatible
    (zero mean for pure-Neumann operators) and `project` should map vectors
    onto the range to keep rounding from drifting into the kernel.  A
    non-positive curvature direction raises SolverError rather than being
    ignored.
    """
    _check_system(A, b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, True)
    apply_m = _preconditioner(A, precond)
    x = np.zeros_like(b) if x0 is None else x0.astype(float, copy=True)
    r = b - A @ x
    if project is not None:
        r = project(r)
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    it = 0
    while it < maxit:
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol * bnorm:
            break
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            if rnorm <= 10.0 * tol * bnorm:
                break
            raise SolverError(
                f"cg breakdown: non-positive curvature {pAp:.3e} at iteration {it}"
            )
        alpha = rz / pAp
        x += alpha * p
        it += 1
        if it % 50 == 0:
            r = b - A @ x  # periodic true-residual refresh against drift
        else:
            r -= alpha * Ap
        if project is not None:
            r = project(r)
        z = apply_m(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    final = float(np.linalg.norm(b - A @ x)) / bnorm
    return x, SolveReport(it, final, final <= tol)


def gmres_solve(
    A: SparseMatrix,
    b: np.ndarray,
    tol: float = 1e-10,
    maxit: int = 5000,
    restart: int = 50,
    x0: np.ndarray | None = None,
    precond=None,
) -> tuple[np.ndarray, SolveReport]:
    """Restarted GMRES with right preconditioning.

    precond: None for Jacobi from the matrix diagonal, a diagonal vector,
    or an apply-callable.  Right preconditioning keeps the monitored
    residual equal to the true residual of the original system.  maxit
    counts total inner iterations.
    """
    _check_system(A, b)
    n = b.size
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, True)
    apply_m = _preconditioner(A, precond)
    x = np.zeros_like(b) if x0 is None else x0.astype(float, copy=True)
    m = max(1, min(restart, n))
    V = np.empty((m + 1, n))
    H = np.zeros((m + 1, m))
    total = 0
    while True:
        r = b - A @ x
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol * bnorm or total >= maxit:
            break
        V[0] = r / rnorm
        g = np.zeros(m + 1)
        g[0] = rnorm
        cs = np.zeros(m)
        sn = np.zeros(m)
        k = 0
        for j in range(min(m, maxit - total)):
            w = A @ apply_m(V[j])
            # classical Gram-Schmidt with one reorthogonalization pass
            h1 = V[: j + 1] @ w
            w -= h1 @ V[: j + 1]
            h2 = V[: j + 1] @ w
            w -= h2 @ V[: j + 1]
            H[: j + 1, j] = h1 + h2
            hnext = float(np.linalg.norm(w))
            H[j + 1, j] = hnext
            if hnext > 0.0:
                V[j + 1] = w / hnext
            # apply accumulated Givens rotations, then create the new one
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            k = j + 1
            if abs(g[k]) <= tol * bnorm or hnext == 0.0:
                break
        if k > 0:
            y = np.zeros(k)
            for i in range(k - 1, -1, -1):
                y[i] = (g[i] - H[i, i + 1 : k] @ y[i + 1 : k]) / H[i, i]
            x += apply_m(y @ V[:k])
        else:
            break
        if total >= maxit:
            break
    final = float(np.linalg.norm(b - A @ x)) / bnorm
    return x, SolveReport(total, final, final <= tol)


def schur_current_solve(
    grid: GridSpec,
    face_coeff: FaceField,
    rhs_face: FaceField,
    tol: float = 1e-12,
    maxit: int = 20000,
    epot_guess: CellField | None = None,
) -> tuple[FaceField, CellField, SolveReport]:
    """Solve  coeff*J + grad(epot) = rhs,  div J = 0,  J.n = 0 on walls.

    The J block is diagonal in the face values, so eliminating J leaves a
    variable-coefficient Poisson problem for the potential which is solved
    by CG; J is then recovered facewise.  epot is returned with zero cell
    mean; div J equals the CG residual, refined once if it misses the
    absolute target implied by tol.
    """
    cpack = pack_faces(grid, face_coeff)
    if np.any(cpack <= 0.0):
        raise ValueError("face coefficient must be positive")
    cinv = 1.0 / cpack
    idx_bnd = _boundary_face_indices(grid)
    cinv[idx_bnd] = 0.0  # J.n = 0: boundary faces carry no current
    rhs = pack_faces(grid, rhs_face)
    rhs[idx_bnd] = 0.0

    G = grad_matrix(grid)
    D = div_matrix(grid)
    A = (G.T.multiply(cinv) @ G).tocsr()  # = -div(cinv grad .), SPD up to constants
    b = -(D @ (cinv * rhs))
    b -= b.mean()
    x0 = None if epot_guess is None else epot_guess.data.ravel()
    idx_int = np.setdiff1d(np.arange(cinv.size), idx_bnd, assume_unique=True)
    precond = PoissonPreconditioner(grid, float(cinv[idx_int].mean()))
    zero_mean = lambda r: r - r.mean()
    x, report = cg_solve(
        A, b, tol=tol, maxit=maxit, x0=x0, precond=precond, project=zero_mean
    )

    def recover(xvec):
        return cinv * (rhs - G @ xvec)

    J = recover(x)
    div_inf = float(np.abs(div_matrix(grid) @ J).max())
    target = 10.0 * tol * max(1.0, float(np.linalg.norm(rhs)))
    extra = 0
    while div_inf > 0.1 * target and extra < 2:
        resid = b - A @ x
        resid -= resid.mean()
        dx, rep2 = cg_solve(
            A, resid, tol=tol, maxit=maxit, precond=precond, project=zero_mean
        )
        x += dx
        J = recover(x)
        div_inf = float(np.abs(div_matrix(grid) @ J).max())
        report.iterations += rep2.iterations
        extra += 1
    x -= x.mean()
    bnorm = float(np.linalg.norm(b))
    if bnorm > 0.0:
        report.final_residual = float(np.linalg.norm(b - A @ x)) / bnorm
        report.converged = report.final_residual <= tol
    Jf = unpack_faces(grid, J).zero_boundary()
    epot = CellField(x.reshape(grid.nx, grid.ny))
    return Jf, epot, report


def _boundary_face_indices(grid: GridSpec) -> np.ndarray:
    mx = np.zeros((grid.nx + 1, grid.ny), dtype=bool)
    mx[0, :] = mx[-1, :] = True
    my = np.zeros((grid.nx, grid.ny + 1), dtype=bool)
    my[:, 0] = my[:, -1] = True
    return np.flatnonzero(np.concatenate([mx.ravel(), my.ravel()]))


def divergence_inf_norm(grid: GridSpec, v: FaceField) -> float:
    return float(np.abs(div_face_to_cell(grid, v).data).max(initial=0.0))
