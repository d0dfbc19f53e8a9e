"""Batch driver: time loop, CSV/field output, and the eps-sweep harness."""

from __future__ import annotations

import multiprocessing
import os
from pathlib import Path

import numpy as np

from . import diagnostics
from .config import RunConfig, serialize_config
from .errors import ConfigError, InvariantError
from .grid import CellField, FaceField, GridSpec, div_face_to_cell
from .scheme import SolverOptions, State, advance, initial_state

# run-abort thresholds for the conservation/stability invariants
CHARGE_TOL = 1e-10
DIV_U_TOL = 1e-9
ENERGY_SLACK = 1e-8  # allowed increase, relative to the initial energy

CSV_COLUMNS = (
    "step,time,E_total,E_kinetic,E_interfacial,dissipation,phase_mass,"
    "charge_residual,div_u_residual,iters_ch,iters_current,iters_ns"
)

OUTPUT_ROOT_ENV = "CHIMHD_OUTPUT_ROOT"


def resolve_output_dir(cfg: RunConfig) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV, "")
    path = Path(cfg.output_dir)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def validate_state(grid: GridSpec, state: State) -> None:
    """Raise InvariantError unless the state meets its structural invariants."""
    if state.vel.max_boundary_normal() != 0.0:
        raise InvariantError("velocity has nonzero boundary-normal entries")
    if state.current.max_boundary_normal() != 0.0:
        raise InvariantError("current has nonzero boundary-normal entries")
    div_j = float(np.abs(div_face_to_cell(grid, state.current).data).max())
    if div_j > CHARGE_TOL:
        raise InvariantError(f"max|div J| = {div_j:.3e} exceeds {CHARGE_TOL}")
    div_u = float(np.abs(div_face_to_cell(grid, state.vel).data).max())
    if div_u > DIV_U_TOL:
        raise InvariantError(f"max|div u| = {div_u:.3e} exceeds {DIV_U_TOL}")
    scale = max(1.0, float(np.abs(state.pressure.data).max()))
    if abs(float(state.pressure.data.mean())) > 1e-12 * scale:
        raise InvariantError("pressure mean is not zero")
    scale = max(1.0, float(np.abs(state.epot.data).max()))
    if abs(float(state.epot.data.mean())) > 1e-12 * scale:
        raise InvariantError("electric potential mean is not zero")


# ---------------------------------------------------------------------------
# output writers

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_snapshot(path: Path, grid: GridSpec, state: State) -> None:
    """ASCII legacy structured-points snapshot (cell data blocks).

    Layout: the standard 5-line header (DIMENSIONS gives the lattice points
    of the nx x ny cell grid, ORIGIN 0 0 0, SPACING hx hy 1) followed by a
    CELL_DATA section with one SCALARS block per cell field and one VECTORS
    block per face field averaged to the cell centers; values are written
    x-fastest with 17 significant digits.
    """
    lines = [
        "# vtk DataFile Version 3.0",
        f"chimhd snapshot t={_fmt(state.time)}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {_fmt(grid.hx)} {_fmt(grid.hy)} 1",
        f"CELL_DATA {grid.n_cells}",
    ]

    def scalar_block(name: str, f: CellField):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        for j in range(grid.ny):
            lines.append(" ".join(_fmt(v) for v in f.data[:, j]))

    def vector_block(name: str, v: FaceField):
        cx = 0.5 * (v.xcomp[:-1, :] + v.xcomp[1:, :])
        cy = 0.5 * (v.ycomp[:, :-1] + v.ycomp[:, 1:])
        lines.append(f"VECTORS {name} double")
        for j in range(grid.ny):
            lines.append(
                " ".join(
                    f"{_fmt(cx[i, j])} {_fmt(cy[i, j])} 0" for i in range(grid.nx)
                )
            )

    scalar_block("phase", state.phase)
    scalar_block("chem", state.chem)
    scalar_block("pressure", state.pressure)
    scalar_block("epot", state.epot)
    vector_block("velocity", state.vel)
    vector_block("current", state.current)
    path.write_text("\n".join(lines) + "\n")


def write_contour(path: Path, contour: diagnostics.Contour) -> None:
    rows = ["poly_id,x,y"]
    for pid, pts in enumerate(contour.polylines):
        for x, y in pts:
            rows.append(f"{pid},{_fmt(x)},{_fmt(y)}")
    path.write_text("\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# the time loop

def _run_to_final(cfg: RunConfig) -> State:
    grid = GridSpec(cfg.nx, cfg.ny)
    params = cfg.phys_params()
    state = initial_state(grid, cfg.scenario, params)
    options = SolverOptions(
        tol_ch=cfg.tol_ch, tol_current=cfg.tol_current, tol_ns=cfg.tol_ns
    )
    outdir = resolve_output_dir(cfg)
    (outdir / "snapshots").mkdir(parents=True, exist_ok=True)
    (outdir / "contours").mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(serialize_config(cfg))

    def emit(step: int):
        validate_state(grid, state)
        write_snapshot(outdir / "snapshots" / f"step_{step:06d}.vtk", grid, state)
        contour = diagnostics.extract_contour(grid, state.phase)
        write_contour(outdir / "contours" / f"step_{step:06d}.csv", contour)

    n_steps = cfg.n_steps()
    e0 = diagnostics.total_energy(grid, state, params).total
    emit(0)
    rows = [CSV_COLUMNS]
    for step in range(1, n_steps + 1):
        state, diag = advance(grid, state, params, cfg.dt, options)
        if diag.charge_residual > CHARGE_TOL:
            raise InvariantError(
                f"step {step}: max|div J| = {diag.charge_residual:.3e} exceeds {CHARGE_TOL}"
            )
        if diag.div_u_residual > DIV_U_TOL:
            raise InvariantError(
                f"step {step}: max|div u| = {diag.div_u_residual:.3e} exceeds {DIV_U_TOL}"
            )
        rise = diag.energy_after - diag.energy_before
        if cfg.abort_on_energy_increase and rise > ENERGY_SLACK * e0:
            raise InvariantError(
                f"step {step}: energy increased by {rise:.3e} (allowed {ENERGY_SLACK * e0:.3e})"
            )
        ebd = diagnostics.total_energy(grid, state, params)
        it = [r.iterations for r in diag.solver_reports]
        rows.append(
            ",".join(
                [
                    str(step),
                    _fmt(state.time),
                    _fmt(ebd.total),
                    _fmt(ebd.kinetic),
                    _fmt(ebd.interfacial_gradient + ebd.interfacial_bulk),
                    _fmt(diag.dissipation_increment / cfg.dt),
                    _fmt(diag.phase_mass),
                    _fmt(diag.charge_residual),
                    _fmt(diag.div_u_residual),
                    str(it[0]),
                    str(it[1]),
                    str(it[2]),
                ]
            )
        )
        if step % cfg.snapshot_every == 0 or step == n_steps:
            emit(step)
    (outdir / "diagnostics.csv").write_text("\n".join(rows) + "\n")
    return state


def run(cfg: RunConfig) -> int:
    """Run one scenario to t_end; 0 on success, exceptions otherwise."""
    _run_to_final(cfg)
    return 0


# ---------------------------------------------------------------------------
# eps-sweep convergence harness

def _sweep_worker(cfg: RunConfig) -> np.ndarray:
    return _run_to_final(cfg).phase.data


def sweep_epsilon(base: RunConfig, eps_list, eps_ref: float):
    """Run the scenario over decreasing widths and compare final contours
    against the reference width; returns [(eps, hausdorff_to_ref), ...]."""
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ConfigError("eps list is empty")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("eps list must be strictly decreasing")
    if eps_ref >= min(eps_list):
        raise ConfigError("eps_ref must be smaller than every swept eps")

    outdir = resolve_output_dir(base)
    jobs = []
    for eps in eps_list + [eps_ref]:
        cfg = RunConfig(**{**base.__dict__})
        cfg.eps = eps
        cfg.output_dir = str(Path(base.output_dir) / f"eps_{eps:g}")
        jobs.append(cfg)

    procs = int(os.environ.get("CHIMHD_SWEEP_PROCS", "0")) or min(
        len(jobs), os.cpu_count() or 1
    )
    if procs > 1:
        with multiprocessing.get_context("spawn").Pool(procs) as pool:
            finals = pool.map(_sweep_worker, jobs)
    else:
        finals = [_sweep_worker(cfg) for cfg in jobs]

    grid = GridSpec(base.nx, base.ny)
    contours = [diagnostics.extract_contour(grid, CellField(p)) for p in finals]
    ref = contours[-1]
    table = [(eps, diagnostics.hausdorff(c, ref)) for eps, c in zip(eps_list, contours)]
    outdir.mkdir(parents=True, exist_ok=True)
    lines = ["eps,hausdorff_to_ref"] + [f"{_fmt(e)},{_fmt(d)}" for e, d in table]
    (outdir / "hausdorff.csv").write_text("\n".join(lines) + "\n")
    return table
