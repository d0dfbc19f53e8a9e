"""Decoupled three-step time integrator.

Each step advances one block of the coupled phase-field / flow / current
system with a single linear solve:

  1. phase field and chemical potential (coupled, linearly stabilized,
     convection explicit, with a dt-weighted decoupling term);
  2. current density and electric potential (mixed saddle system, reduced
     by a Schur complement because the current block is face-diagonal);
  3. velocity and pressure (implicit viscosity and skew-symmetric
     convection, pressure saddle solved monolithically by GMRES).

Each step consumes the newest available fields: step 2 sees the new phase
and potential but the old velocity, step 3 sees the new phase, potential
and current.  The assembled operators all come from the grid module, whose
adjointness/skewness identities make the composite step energy-stable and
the discrete current exactly solenoidal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import diagnostics
from .errors import SolverError
from .grid import (
    CellField,
    FaceField,
    GridSpec,
    cell_sum,
    convection_matrix,
    div_face_to_cell,
    div_matrix,
    grad_cell_to_face,
    grad_matrix,
    interior_face_indices,
    interp_cell_to_face,
    pack_faces,
    stiffness_matrix,
    unpack_faces,
    viscous_matrix,
    xcomp_at_yfaces,
    ycomp_at_xfaces,
)
from .linsolve import SolveReport, cg_solve, gmres_solve, schur_current_solve
from .physics import PhysParams, mobility, potential_f
from .spectral import PhasePreconditioner, StokesPreconditioner


@dataclass
class State:
    """All unknowns at one time level."""

    phase: CellField
    chem: CellField
    vel: FaceField
    pressure: CellField
    current: FaceField
    epot: CellField
    time: float = 0.0

    def copy(self) -> "State":
        return State(
            self.phase.copy(),
            self.chem.copy(),
            self.vel.copy(),
            self.pressure.copy(),
            self.current.copy(),
            self.epot.copy(),
            self.time,
        )


@dataclass
class StepDiagnostics:
    energy_before: float
    energy_after: float
    dissipation_increment: float
    phase_mass: float
    charge_residual: float
    div_u_residual: float
    phase_overshoot: float
    solver_reports: tuple[SolveReport, SolveReport, SolveReport]


@dataclass(frozen=True)
class SolverOptions:
    """Linear-solver tolerances and iteration limits for one advance step.

    Tolerances are relative 2-norm residuals.  div_weight scales the
    continuity rows of the velocity saddle system so the converged momentum
    solve also meets the absolute incompressibility target; None means 1/dt.
    """

    tol_ch: float = 1e-12
    tol_current: float = 1e-12
    tol_ns: float = 1e-11
    maxit: int = 8000
    restart: int = 200
    div_weight: float | None = None


def _face_phase(grid: GridSpec, phase: CellField) -> np.ndarray:
    return pack_faces(grid, interp_cell_to_face(grid, phase))


def ch_step(
    grid: GridSpec,
    state: State,
    params: PhysParams,
    dt: float,
    tol: float = 1e-12,
    maxit: int = 8000,
    restart: int = 200,
) -> tuple[CellField, CellField, SolveReport]:
    """Phase / chemical-potential step (one nonsymmetric linear solve).

    Discrete form, with c = M(phi_face) + dt*phi_face^2 lagged at faces:

        (phi' - phi)/dt + div(phi_face u) = div(c grad mu'),
        gamma*eps*(-lap phi') + (gamma S/eps)(phi' - phi)
            + (gamma/eps) f(phi) - mu' = 0.

    The conservative convection plus no-flux boundaries make the cell sum
    of phi' equal that of phi up to the solver residual.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    n = grid.n_cells
    G = grad_matrix(grid)
    K0 = stiffness_matrix(grid)
    phi = state.phase.data.ravel()
    phi_face = _face_phase(grid, state.phase)
    coeff = mobility(params.mobility, params.eps, phi_face) + dt * phi_face**2
    Aop = (G.T.multiply(coeff) @ G).tocsr()
    Bop = (params.gamma * params.eps) * K0 + sp.identity(n) * (
        params.gamma * params.s_stab / params.eps
    )

    conv = FaceField.zeros(grid)
    uf = state.vel
    pf = unpack_faces(grid, phi_face)
    conv.xcomp[:] = pf.xcomp * uf.xcomp
    conv.ycomp[:] = pf.ycomp * uf.ycomp

    # increment unknowns (phi' - phi, mu'): both right-hand sides are sums of
    # discrete divergences, which keeps the solver residual (hence the mass
    # defect) proportional to the small per-step change instead of phi/dt
    r1 = -div_face_to_cell(grid, conv).data.ravel()
    r2 = -(params.gamma / params.eps) * potential_f(
        params.potential, state.phase.data
    ).ravel() - (params.gamma * params.eps) * (K0 @ phi)

    # symmetric quasi-definite arrangement: rows [mu-equation; -dt * phase-eq]
    eye = sp.identity(n, format="csr")
    K = sp.bmat([[Bop, -eye], [-eye, (-dt) * Aop]], format="csr")
    b = np.concatenate([r2, -dt * r1])
    x0 = np.concatenate([np.zeros(n), state.chem.data.ravel()])
    idx_int = interior_face_indices(grid)
    precond = PhasePreconditioner(
        grid, params.gamma, params.eps, params.s_stab, dt,
        cbar=float(coeff[idx_int].mean()),
    )
    x, report = gmres_solve(
        K, b, tol=tol, maxit=maxit, restart=restart, x0=x0, precond=precond
    )
    if not report.converged:
        raise SolverError(
            f"phase step GMRES stalled at residual {report.final_residual:.3e}",
            report,
        )
    phase_new = CellField(phi.reshape(grid.nx, grid.ny) + x[:n].reshape(grid.nx, grid.ny))
    chem_new = CellField(x[n:].reshape(grid.nx, grid.ny))
    return phase_new, chem_new, report


def current_step(
    grid: GridSpec,
    phase_new: CellField,
    chem_new: CellField,
    vel_old: FaceField,
    params: PhysParams,
    dt: float,
    tol: float = 1e-12,
    maxit: int = 20000,
    epot_guess: CellField | None = None,
) -> tuple[FaceField, CellField, SolveReport]:
    """Current / electric-potential step.

    With the applied field out of plane, (JxB).(KxB) = b^2 J.K for in-plane
    currents, so the current block collapses to the face-diagonal coefficient
    sigma(phi)^-1 + dt b^2 and the saddle system reduces to a Poisson solve:

        (sigma(phi')^-1 + dt b^2) J + grad(epot) = u x B + dt (phi' grad mu') x B,
        div J = 0.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    b = params.b
    sinv_cell = CellField(1.0 / params.conductivity(phase_new.data))
    sinv_face = interp_cell_to_face(grid, sinv_cell)
    coeff = FaceField(sinv_face.xcomp + dt * b * b, sinv_face.ycomp + dt * b * b)

    gmu = grad_cell_to_face(grid, chem_new)
    pf = interp_cell_to_face(grid, phase_new)
    force = FaceField(pf.xcomp * gmu.xcomp, pf.ycomp * gmu.ycomp)
    rhs = FaceField.zeros(grid)
    rhs.xcomp[:] = b * (ycomp_at_xfaces(grid, vel_old) + dt * ycomp_at_xfaces(grid, force))
    rhs.ycomp[:] = -b * (xcomp_at_yfaces(grid, vel_old) + dt * xcomp_at_yfaces(grid, force))
    return schur_current_solve(
        grid, coeff, rhs, tol=tol, maxit=maxit, epot_guess=epot_guess
    )


def ns_step(
    grid: GridSpec,
    state: State,
    phase_new: CellField,
    chem_new: CellField,
    current_new: FaceField,
    params: PhysParams,
    dt: float,
    tol: float = 1e-11,
    maxit: int = 8000,
    restart: int = 200,
    div_weight: float | None = None,
) -> tuple[FaceField, CellField, SolveReport]:
    """Velocity / pressure step (monolithic saddle solve by GMRES).

        (u' - u)/dt + C(u) u' - 2 div(eta(phi') D(u')) + grad p'
            = -phi' grad mu' + J' x B,      div u' = 0,  no slip.

    Continuity rows are scaled by div_weight (default 1/dt) so that the
    converged relative residual also bounds max|div u'| tightly; the
    pressure block of the Jacobi preconditioner uses the diagonal of the
    approximate pressure Schur complement.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    idx = interior_face_indices(grid)
    eta_cell = CellField(params.viscosity(phase_new.data))
    A_full = (
        viscous_matrix(grid, eta_cell)
        + convection_matrix(grid, state.vel)
        + sp.identity(pack_faces(grid, state.vel).size) / dt
    ).tocsr()
    A_int = A_full[idx][:, idx]
    G_int = grad_matrix(grid)[idx]
    D_int = (-G_int.T).tocsr()
    omega = (1.0 / dt) if div_weight is None else div_weight
    K = sp.bmat([[A_int, G_int], [omega * D_int, None]], format="csr")

    gmu = grad_cell_to_face(grid, chem_new)
    pf = interp_cell_to_face(grid, phase_new)
    force = pack_faces(
        grid, FaceField(pf.xcomp * gmu.xcomp, pf.ycomp * gmu.ycomp)
    )
    lorentz = pack_faces(
        grid,
        FaceField(
            params.b * ycomp_at_xfaces(grid, current_new),
            -params.b * xcomp_at_yfaces(grid, current_new),
        ),
    )
    # increment unknowns (u' - u, p'): the continuity rows then pull the
    # divergence of the full velocity back to the solver-residual level
    u_int = pack_faces(grid, state.vel)[idx]
    b_u = (pack_faces(grid, state.vel) / dt - force + lorentz)[idx] - A_int @ u_int
    rhs = np.concatenate([b_u, -omega * (D_int @ u_int)])

    precond = StokesPreconditioner(
        grid, dt, float(eta_cell.data.mean()), G_int, omega
    )
    x0 = np.concatenate([np.zeros(idx.size), state.pressure.data.ravel()])
    x, report = gmres_solve(
        K, rhs, tol=tol, maxit=maxit, restart=restart, x0=x0, precond=precond
    )
    if not report.converged:
        raise SolverError(
            f"flow step GMRES stalled at residual {report.final_residual:.3e}",
            report,
        )
    nfi = idx.size
    packed = np.zeros(pack_faces(grid, state.vel).size)
    packed[idx] = u_int + x[:nfi]
    vel_new = unpack_faces(grid, packed)
    p = x[nfi:]
    pressure_new = CellField((p - p.mean()).reshape(grid.nx, grid.ny))
    return vel_new, pressure_new, report


def advance(
    grid: GridSpec,
    state: State,
    params: PhysParams,
    dt: float,
    options: SolverOptions = SolverOptions(),
) -> tuple[State, StepDiagnostics]:
    """One full time step (phase, current, flow) plus step diagnostics."""
    energy_before = diagnostics.total_energy(grid, state, params).total
    phase_new, chem_new, rep_ch = ch_step(
        grid, state, params, dt, tol=options.tol_ch,
        maxit=options.maxit, restart=options.restart,
    )
    current_new, epot_new, rep_j = current_step(
        grid, phase_new, chem_new, state.vel, params, dt,
        tol=options.tol_current, maxit=options.maxit, epot_guess=state.epot,
    )
    vel_new, pressure_new, rep_ns = ns_step(
        grid, state, phase_new, chem_new, current_new, params, dt,
        tol=options.tol_ns, maxit=options.maxit, restart=options.restart,
        div_weight=options.div_weight,
    )
    new_state = State(
        phase=phase_new,
        chem=chem_new,
        vel=vel_new,
        pressure=pressure_new,
        current=current_new,
        epot=epot_new,
        time=state.time + dt,
    )
    energy_after = diagnostics.total_energy(grid, new_state, params).total
    diag = StepDiagnostics(
        energy_before=energy_before,
        energy_after=energy_after,
        dissipation_increment=dt * diagnostics.dissipation_rate(grid, new_state, params),
        phase_mass=cell_sum(grid, phase_new),
        charge_residual=float(np.abs(div_face_to_cell(grid, current_new).data).max()),
        div_u_residual=float(np.abs(div_face_to_cell(grid, vel_new).data).max()),
        phase_overshoot=float(np.maximum(np.abs(phase_new.data) - 1.0, 0.0).max()),
        solver_reports=(rep_ch, rep_j, rep_ns),
    )
    return new_state, diag


# ---------------------------------------------------------------------------
# initial data

def project_div_free(grid: GridSpec, u: FaceField, tol: float = 1e-13) -> FaceField:
    """Project a face field onto the discretely divergence-free subspace."""
    G = grad_matrix(grid)
    b = -div_face_to_cell(grid, u).data.ravel()
    b = b - b.mean()
    chi, report = cg_solve(stiffness_matrix(grid), b, tol=tol, maxit=20000)
    if not report.converged:
        raise SolverError("divergence-free projection did not converge", report)
    corr = unpack_faces(grid, G @ chi)
    out = FaceField(u.xcomp - corr.xcomp, u.ycomp - corr.ycomp)
    return out.zero_boundary()


def vortex_profile(x, y):
    """Components of the large-vortex initial velocity on the unit square."""
    ux = x**2 * (1.0 - x) ** 2 * y * (1.0 - y) * (1.0 - 2.0 * y)
    uy = -x * (1.0 - x) * (1.0 - 2.0 * x) * y**2 * (1.0 - y) ** 2
    return ux, uy


def init_vortex(grid: GridSpec) -> FaceField:
    """Large-vortex initial velocity on the unit square, face-sampled and
    then projected to the exactly divergence-free discrete subspace."""
    if abs(grid.lx - 1.0) > 1e-12 or abs(grid.ly - 1.0) > 1e-12:
        raise ValueError("vortex initial data is defined on the unit square")
    u = FaceField.zeros(grid)
    x, y = grid.xface_coords()
    u.xcomp[:] = vortex_profile(x, y)[0]
    x, y = grid.yface_coords()
    u.ycomp[:] = vortex_profile(x, y)[1]
    u.zero_boundary()
    return project_div_free(grid, u)


def init_rounded_square(grid: GridSpec, eps: float) -> CellField:
    """Rounded-square phase field: tanh profile of the l4 distance to
    (0.5, 0.5) minus 0.3."""
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    x, y = grid.cell_centers()
    r4 = ((x - 0.5) ** 4 + (y - 0.5) ** 4) ** 0.25
    return CellField(np.tanh((r4 - 0.3) / (np.sqrt(2.0) * eps)))


def init_two_bubbles(grid: GridSpec, eps: float) -> CellField:
    """Two unequal circular bubbles at (0.3, 0.5) r=0.1 and (0.7, 0.5) r=0.2."""
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    x, y = grid.cell_centers()
    s2e = np.sqrt(2.0) * eps
    d1 = np.hypot(x - 0.3, y - 0.5) - 0.1
    d2 = np.hypot(x - 0.7, y - 0.5) - 0.2
    return CellField(1.0 - np.tanh(d1 / s2e) - np.tanh(d2 / s2e))


def init_circle(grid: GridSpec, eps: float, center=(0.5, 0.5), radius: float = 0.25) -> CellField:
    """Single circular droplet (phase -1 inside), used by the benchmarks."""
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    x, y = grid.cell_centers()
    d = np.hypot(x - center[0], y - center[1]) - radius
    return CellField(np.tanh(d / (np.sqrt(2.0) * eps)))


def chemical_potential_of(grid: GridSpec, phase: CellField, params: PhysParams) -> CellField:
    """Variational chemical potential of a phase field (used at t = 0)."""
    lap = div_face_to_cell(grid, grad_cell_to_face(grid, phase))
    mu = -params.gamma * params.eps * lap.data + (
        params.gamma / params.eps
    ) * potential_f(params.potential, phase.data)
    return CellField(mu)


def initial_state(grid: GridSpec, scenario: str, params: PhysParams) -> State:
    """Assemble the t = 0 state for one of the shipped scenarios."""
    if scenario == "rounded_square":
        phase = init_rounded_square(grid, params.eps)
        vel = init_vortex(grid)
    elif scenario == "two_bubbles":
        phase = init_two_bubbles(grid, params.eps)
        vel = init_vortex(grid)
    elif scenario == "vortex_only":
        phase = CellField.full(grid, 1.0)
        vel = init_vortex(grid)
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return State(
        phase=phase,
        chem=chemical_potential_of(grid, phase, params),
        vel=vel,
        pressure=CellField.zeros(grid),
        current=FaceField.zeros(grid),
        epot=CellField.zeros(grid),
        time=0.0,
    )
