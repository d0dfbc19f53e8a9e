"""Randomized invariant self-test battery behind `chimhd check`.

Exercises the algebraic identities that carry the scheme's stability and
conservation structure, on random small grids and fields, plus a short
equilibrium time step.  Prints one line per check.
"""

from __future__ import annotations

import numpy as np

from . import diagnostics
from .grid import (
    CellField,
    FaceField,
    GridSpec,
    cell_inner,
    cell_sum,
    convect,
    div_face_to_cell,
    face_inner,
    grad_cell_to_face,
    strain_energy,
    viscous_apply,
)
from .physics import EQUILIBRIUM_GRADIENT_ENERGY, MobilityCase, PhysParams, cross_with_B
from .scheme import State, advance, initial_state


def _random_setup(rng):
    nx = int(rng.integers(4, 13))
    ny = int(rng.integers(4, 13))
    grid = GridSpec(nx, ny, float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)))
    cell = CellField(rng.standard_normal((nx, ny)))
    face = FaceField(
        rng.standard_normal((nx + 1, ny)), rng.standard_normal((nx, ny + 1))
    ).zero_boundary()
    return grid, cell, face


def check_operator_identities(trials: int = 200, seed: int = 7) -> dict:
    """Max relative defect of each operator identity over random trials."""
    rng = np.random.default_rng(seed)
    worst = {"sbp": 0.0, "viscous_sym": 0.0, "viscous_nsd": -np.inf,
             "convect_skew": 0.0, "cross_exchange": 0.0, "div_sum": 0.0}
    for _ in range(trials):
        grid, f, v = _random_setup(rng)
        w = FaceField(
            rng.standard_normal((grid.nx + 1, grid.ny)),
            rng.standard_normal((grid.nx, grid.ny + 1)),
        ).zero_boundary()
        eta = CellField(rng.uniform(0.2, 3.0, (grid.nx, grid.ny)))

        gf = grad_cell_to_face(grid, f)
        s = face_inner(grid, gf, v) + cell_inner(grid, f, div_face_to_cell(grid, v))
        scale = max(abs(face_inner(grid, gf, v)), 1e-30)
        worst["sbp"] = max(worst["sbp"], abs(s) / scale)

        Lv, Lw = viscous_apply(grid, eta, v), viscous_apply(grid, eta, w)
        a, bsym = face_inner(grid, Lv, w), face_inner(grid, v, Lw)
        worst["viscous_sym"] = max(worst["viscous_sym"], abs(a - bsym) / max(abs(a), 1e-30))
        q = strain_energy(grid, eta, v)
        worst["viscous_nsd"] = max(
            worst["viscous_nsd"], abs(-face_inner(grid, Lv, v) - q) / max(q, 1e-30)
        )

        cw = convect(grid, v, w)
        worst["convect_skew"] = max(
            worst["convect_skew"],
            abs(face_inner(grid, cw, w)) / max(face_inner(grid, w, w), 1e-30),
        )

        b = float(rng.uniform(-2.0, 2.0))
        jx, jy = v.xcomp, v.ycomp  # reuse as a current-like field
        # pointwise exchange identity on collocated samples
        ux, uy = rng.standard_normal(2)
        cx, cy = cross_with_B(jx.mean(), jy.mean(), b)
        dx, dy = cross_with_B(ux, uy, b)
        ex = (cx * ux + cy * uy) + (dx * jx.mean() + dy * jy.mean())
        worst["cross_exchange"] = max(worst["cross_exchange"], abs(ex))

        total = cell_sum(grid, div_face_to_cell(grid, v))
        worst["div_sum"] = max(worst["div_sum"], abs(total))
    return worst


def run_battery(verbose: bool = True) -> bool:
    """Run all self-tests; returns True when everything passes."""
    results = []
    w = check_operator_identities()
    results.append(("summation-by-parts", w["sbp"] < 1e-12))
    results.append(("viscous symmetry", w["viscous_sym"] < 1e-12))
    results.append(("viscous dissipation form", w["viscous_nsd"] < 1e-12))
    results.append(("convection skew-symmetry", w["convect_skew"] < 1e-12))
    results.append(("Lorentz exchange identity", w["cross_exchange"] < 1e-12))
    results.append(("divergence telescoping", w["div_sum"] < 1e-12))

    iota = diagnostics.iota_quadrature()
    results.append(
        ("profile gradient-energy constant",
         abs(iota - EQUILIBRIUM_GRADIENT_ENERGY) < 1e-9)
    )

    grid = GridSpec(16, 16)
    params = PhysParams(eps=0.1, gamma=0.1, mobility=MobilityCase("I", 1.0))
    state = initial_state(grid, "vortex_only", params)
    state = State(
        state.phase, state.chem, FaceField.zeros(grid), state.pressure,
        state.current, state.epot, 0.0,
    )
    new, diag = advance(grid, state, params, 0.01)
    fixed = (
        float(np.abs(new.phase.data - state.phase.data).max()) < 1e-10
        and float(np.abs(new.vel.xcomp).max()) < 1e-10
        and diag.charge_residual < 1e-12
    )
    results.append(("pure-phase equilibrium fixed point", fixed))

    ok = all(passed for _, passed in results)
    if verbose:
        for name, passed in results:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
