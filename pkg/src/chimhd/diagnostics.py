"""Measurements on simulation states.

Energies and dissipation mirror the discrete forms used by the stepper, so
the reported energy sequence is exactly the quantity the scheme keeps
non-increasing.  Contour extraction (marching squares on the zero level
set), circle fitting and Hausdorff distances quantify interface geometry;
the remaining routines measure how well the thin-interface solution honors
the zero-width limit: equilibrium profile, energy equipartition, pressure
jump, curvature/chemical-potential relation, and the interfacial mass-flux
balance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .grid import (
    CellField,
    FaceField,
    GridSpec,
    cell_sum,
    face_inner,
    grad_cell_to_face,
    interp_cell_to_face,
    strain_energy,
)
from .physics import (
    FLORY_HUGGINS,
    GINZBURG_LANDAU,
    PhysParams,
    PotentialKind,
    mobility,
    potential_F,
    potential_f,
)

if TYPE_CHECKING:
    from .scheme import State


# ---------------------------------------------------------------------------
# energy and dissipation

@dataclass
class EnergyBreakdown:
    kinetic: float
    interfacial_gradient: float
    interfacial_bulk: float
    total: float


def total_energy(grid: GridSpec, state: "State", params: PhysParams) -> EnergyBreakdown:
    """Discrete free energy: kinetic + gradient + bulk double-well parts."""
    kinetic = 0.5 * face_inner(grid, state.vel, state.vel)
    g = grad_cell_to_face(grid, state.phase)
    gradient = 0.5 * params.gamma * params.eps * face_inner(grid, g, g)
    bulk = (params.gamma / params.eps) * cell_sum(
        grid, CellField(potential_F(params.potential, state.phase.data))
    )
    return EnergyBreakdown(kinetic, gradient, bulk, kinetic + gradient + bulk)


def dissipation_rate(grid: GridSpec, state: "State", params: PhysParams) -> float:
    """Discrete dissipation functional: viscous + diffusive + Ohmic terms.

    Coefficients are sampled at faces exactly as the stepper samples them.
    """
    visc = strain_energy(grid, CellField(params.viscosity(state.phase.data)), state.vel)
    phif = interp_cell_to_face(grid, state.phase)
    gmu = grad_cell_to_face(grid, state.chem)
    mx = mobility(params.mobility, params.eps, phif.xcomp)
    my = mobility(params.mobility, params.eps, phif.ycomp)
    diff = grid.cell_volume * (
        float(np.sum(mx * gmu.xcomp**2)) + float(np.sum(my * gmu.ycomp**2))
    )
    sinv = interp_cell_to_face(grid, CellField(1.0 / params.conductivity(state.phase.data)))
    ohm = grid.cell_volume * (
        float(np.sum(sinv.xcomp * state.current.xcomp**2))
        + float(np.sum(sinv.ycomp * state.current.ycomp**2))
    )
    return visc + diff + ohm


# ---------------------------------------------------------------------------
# contour extraction (marching squares on cell-centered values)

@dataclass
class Contour:
    """Polylines approximating the zero level set; points are (x, y) rows."""

    polylines: list
    closed: list

    def __len__(self):
        return len(self.polylines)

    @property
    def is_empty(self) -> bool:
        return not self.polylines

    def single(self) -> np.ndarray:
        if len(self.polylines) != 1:
            raise ValueError(f"expected a single polyline, got {len(self.polylines)}")
        return self.polylines[0]

    def vertex_count(self) -> int:
        return sum(len(p) for p in self.polylines)


# per corner-sign code: list of segments as (edge_a, edge_b) with local edges
# 0=bottom 1=right 2=top 3=left; codes 5 and 10 are the saddle cases and get
# resolved by the sign of the corner average.
_MS_TABLE = {
    1: [(0, 3)],
    2: [(0, 1)],
    3: [(3, 1)],
    4: [(1, 2)],
    6: [(0, 2)],
    7: [(3, 2)],
    8: [(3, 2)],
    9: [(0, 2)],
    11: [(1, 2)],
    12: [(3, 1)],
    13: [(0, 1)],
    14: [(0, 3)],
}
_MS_SADDLE = {
    5: ([(0, 1), (2, 3)], [(0, 3), (1, 2)]),   # (center > 0, center <= 0)
    10: ([(0, 3), (1, 2)], [(0, 1), (2, 3)]),
}


def extract_contour(grid: GridSpec, phi: CellField) -> Contour:
    """Zero level set of a cell field as stitched polylines.

    Linear interpolation along lattice edges between cell centers; saddle
    squares are disambiguated by the corner-average sign.  Returns an empty
    contour when the field has a single sign.
    """
    v = phi.data
    nx, ny = grid.nx, grid.ny
    pos = v > 0.0
    if pos.all() or not pos.any():
        return Contour([], [])
    xs = (np.arange(nx) + 0.5) * grid.hx
    ys = (np.arange(ny) + 0.5) * grid.hy

    code = (
        pos[:-1, :-1].astype(np.int8)
        + 2 * pos[1:, :-1]
        + 4 * pos[1:, 1:]
        + 8 * pos[:-1, 1:]
    )
    active = np.argwhere((code != 0) & (code != 15))

    def edge_key(i, j, local):
        # global edge ids: ("h", i, j) joins centers (i,j)-(i+1,j);
        #                  ("v", i, j) joins centers (i,j)-(i,j+1)
        if local == 0:
            return ("h", i, j)
        if local == 2:
            return ("h", i, j + 1)
        if local == 3:
            return ("v", i, j)
        return ("v", i + 1, j)

    segments = []
    for i, j in active:
        c = int(code[i, j])
        if c in _MS_SADDLE:
            avg = 0.25 * (v[i, j] + v[i + 1, j] + v[i + 1, j + 1] + v[i, j + 1])
            segs = _MS_SADDLE[c][0] if avg > 0.0 else _MS_SADDLE[c][1]
        else:
            segs = _MS_TABLE[c]
        for a, b in segs:
            segments.append((edge_key(i, j, a), edge_key(i, j, b)))

    def crossing(key):
        kind, i, j = key
        if kind == "h":
            va, vb = v[i, j], v[i + 1, j]
            t = np.clip(va / (va - vb), 0.0, 1.0)
            return (xs[i] + t * grid.hx, ys[j])
        va, vb = v[i, j], v[i, j + 1]
        t = np.clip(va / (va - vb), 0.0, 1.0)
        return (xs[i], ys[j] + t * grid.hy)

    # stitch segments into chains via shared edge keys
    adjacency = {}
    for sid, (a, b) in enumerate(segments):
        adjacency.setdefault(a, []).append((sid, b))
        adjacency.setdefault(b, []).append((sid, a))
    used = [False] * len(segments)
    polylines, closed = [], []
    for sid0 in range(len(segments)):
        if used[sid0]:
            continue
        used[sid0] = True
        a0, b0 = segments[sid0]
        chain = [a0, b0]
        # extend forward from b0, then backward from a0
        for end in (1, 0):
            while True:
                tip = chain[-1] if end else chain[0]
                nxt = None
                for sid, other in adjacency.get(tip, ()):
                    if not used[sid]:
                        nxt = (sid, other)
                        break
                if nxt is None:
                    break
                used[nxt[0]] = True
                if end:
                    chain.append(nxt[1])
                else:
                    chain.insert(0, nxt[1])
            if chain[0] == chain[-1]:
                break
        is_closed = chain[0] == chain[-1]
        if is_closed:
            chain = chain[:-1]
        pts = np.array([crossing(k) for k in chain])
        polylines.append(pts)
        closed.append(is_closed)
    return Contour(polylines, closed)


# ---------------------------------------------------------------------------
# polyline geometry

def _all_segments(c: Contour):
    starts, ends = [], []
    for pts, is_closed in zip(c.polylines, c.closed):
        if len(pts) < 2:
            continue
        s = pts
        e = np.roll(pts, -1, axis=0) if is_closed else None
        if is_closed:
            starts.append(s)
            ends.append(e)
        else:
            starts.append(pts[:-1])
            ends.append(pts[1:])
    if not starts:
        raise ValueError("contour has no segments")
    return np.concatenate(starts), np.concatenate(ends)


def _point_segment_distances(points: np.ndarray, starts: np.ndarray, ends: np.ndarray):
    """Min distance from each point to any segment (vectorized)."""
    d = ends - starts                                   # (m, 2)
    dd = np.einsum("ij,ij->i", d, d)
    dd[dd == 0.0] = 1.0
    out = np.empty(len(points))
    chunk = max(1, 2_000_000 // max(len(starts), 1))
    for lo in range(0, len(points), chunk):
        p = points[lo : lo + chunk]
        w = p[:, None, :] - starts[None, :, :]          # (n, m, 2)
        t = np.clip(np.einsum("nmk,mk->nm", w, d) / dd, 0.0, 1.0)
        proj = w - t[:, :, None] * d[None, :, :]
        out[lo : lo + chunk] = np.sqrt(np.einsum("nmk,nmk->nm", proj, proj).min(axis=1))
    return out


def hausdorff(a: Contour, b: Contour) -> float:
    """Symmetric Hausdorff distance between contours.

    Vertices of one contour are measured against the full polylines of the
    other (point-to-segment), and vice versa.
    """
    if a.is_empty or b.is_empty:
        raise ValueError("hausdorff distance needs nonempty contours")
    pa = np.concatenate(a.polylines)
    pb = np.concatenate(b.polylines)
    sa, ea = _all_segments(a)
    sb, eb = _all_segments(b)
    d_ab = _point_segment_distances(pa, sb, eb).max()
    d_ba = _point_segment_distances(pb, sa, ea).max()
    return float(max(d_ab, d_ba))


def circle_fit(c: Contour):
    """Least-squares (algebraic) circle fit of a single polyline.

    Returns (center, radius, rms) with rms the root-mean-square radial
    residual; raises on degenerate (collinear) input.
    """
    pts = c.single()
    x, y = pts[:, 0], pts[:, 1]
    A = np.column_stack([2.0 * x, 2.0 * y, np.ones_like(x)])
    rhs = x**2 + y**2
    sol, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < 3:
        raise ValueError("degenerate (collinear) contour, cannot fit a circle")
    cx, cy, cc = sol
    r2 = cc + cx**2 + cy**2
    if r2 <= 0.0:
        raise ValueError("degenerate circle fit")
    radius = float(np.sqrt(r2))
    r = np.hypot(x - cx, y - cy)
    rms = float(np.sqrt(np.mean((r - radius) ** 2)))
    return (float(cx), float(cy)), radius, rms


def isoperimetric_ratio(c: Contour) -> float:
    """4 pi A / P^2 of a single closed polyline; 1 for a circle."""
    pts = c.single()
    if not c.closed[0]:
        raise ValueError("isoperimetric ratio needs a closed polyline")
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    area = 0.5 * abs(float(np.sum(x * yn - xn * y)))
    perim = float(np.sum(np.hypot(xn - x, yn - y)))
    if perim == 0.0:
        raise ValueError("degenerate polyline")
    return 4.0 * np.pi * area / perim**2


def _points_inside(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule point-in-polygon test, vectorized over points."""
    x, y = points[:, 0], points[:, 1]
    x1, y1 = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    inside = np.zeros(len(points), dtype=bool)
    for k in range(len(poly)):
        cond = (y1[k] > y) != (y2[k] > y)
        xk = x1[k] + (y - y1[k]) * (x2[k] - x1[k]) / (y2[k] - y1[k] + 1e-300)
        inside ^= cond & (x < xk)
    return inside


# ---------------------------------------------------------------------------
# sharp-limit measurements

def mechanical_pressure(state: "State") -> np.ndarray:
    """Pressure with the phase-potential shift removed.

    The momentum step carries the capillary force in potential form, so the
    solved pressure absorbs -phi*mu relative to the one whose jump balances
    the interfacial stress; adding phi*mu back recovers it.
    """
    return state.pressure.data + state.phase.data * state.chem.data


def pressure_jump(grid: GridSpec, state: "State", c: Contour, band: float) -> float:
    """Mean mechanical pressure deep inside a droplet minus far outside.

    'Deep'/'far' means farther than `band` from the contour on each side.
    """
    poly = c.single()
    if not c.closed[0]:
        raise ValueError("pressure jump needs a closed droplet contour")
    x, y = grid.cell_centers()
    pts = np.column_stack([x.ravel(), y.ravel()])
    inside = _points_inside(pts, poly)
    dist = _point_segment_distances(pts, *_all_segments(c))
    phat = mechanical_pressure(state).ravel()
    m_in = inside & (dist > band)
    m_out = ~inside & (dist > band)
    if not m_in.any() or not m_out.any():
        raise ValueError("pressure averaging bands are empty")
    return float(phat[m_in].mean() - phat[m_out].mean())


def gibbs_thomson_residual(grid: GridSpec, state: "State", c: Contour, params: PhysParams) -> float:
    """Relative defect of the interfacial chemical-potential/curvature
    relation 2*mu = lambda_hat*kappa for a near-circular droplet.

    kappa is signed by the droplet phase: positive when the enclosed phase
    is the +1 phase (the normal convention points into it).
    """
    (cx, cy), radius, _ = circle_fit(c)
    phi = state.phase.data
    band = np.abs(phi) < 0.9
    if not band.any():
        raise ValueError("no interfacial band cells")
    mu_mean = float(state.chem.data[band].mean())
    ic = min(max(int(cx / grid.hx), 0), grid.nx - 1)
    jc = min(max(int(cy / grid.hy), 0), grid.ny - 1)
    sign = 1.0 if phi[ic, jc] > 0.0 else -1.0
    target = 0.5 * params.sharp_surface_tension * sign / radius
    return abs(mu_mean - target) / abs(target)


def equipartition_residual(grid: GridSpec, phi: CellField, params: PhysParams) -> float:
    """Peak defect of (eps^2/2)|grad phi|^2 = F(phi) over the layer |phi|<0.9,
    rescaled by the largest bulk density in the layer."""
    band = np.abs(phi.data) < 0.9
    if not band.any():
        raise ValueError("no interfacial band cells")
    g = grad_cell_to_face(grid, phi)
    gx = 0.5 * (g.xcomp[:-1, :] + g.xcomp[1:, :])
    gy = 0.5 * (g.ycomp[:, :-1] + g.ycomp[:, 1:])
    grad2 = gx**2 + gy**2
    F = potential_F(params.potential, phi.data)
    defect = np.abs(0.5 * params.eps**2 * grad2 - F)
    return float(defect[band].max() / F[band].max())


# ---------------------------------------------------------------------------
# the one-dimensional profile oracle

def profile_tanh(xi):
    """Equilibrium interface profile tanh(xi / sqrt(2))."""
    return np.tanh(np.asarray(xi, dtype=float) / np.sqrt(2.0))


def iota_quadrature(kind: PotentialKind = PotentialKind()) -> float:
    """Gradient energy of the equilibrium profile, integral of |d profile|^2.

    Quartic well: adaptive quadrature of 0.5 sech^4(xi/sqrt(2)) over a
    truncated line (exponential tails).  Logarithmic well: no closed-form
    profile; computed through the equipartition substitution as the integral
    of sqrt(2 (F - F_min)) between the minima.
    """
    if kind.variant == GINZBURG_LANDAU:
        val, err = quad(
            lambda s: 0.5 / np.cosh(s / np.sqrt(2.0)) ** 4,
            -40.0,
            40.0,
            epsabs=1e-12,
            epsrel=1e-12,
            limit=200,
        )
    elif kind.variant == FLORY_HUGGINS:
        m = brentq(lambda p: potential_f(kind, p), 1e-9, 1.0 - 1e-13, xtol=1e-15)
        fmin = potential_F(kind, m)
        val, err = quad(
            lambda p: np.sqrt(max(2.0 * (potential_F(kind, p) - fmin), 0.0)),
            -m,
            m,
            epsabs=1e-12,
            epsrel=1e-12,
            limit=400,
        )
    else:  # pragma: no cover
        raise ValueError(f"unknown potential {kind.variant!r}")
    if err > 1e-9:
        raise RuntimeError(f"profile quadrature did not converge (err={err:.2e})")
    return float(val)


# ---------------------------------------------------------------------------
# interface kinematics (Stefan-type flux balance)

def _bilinear(arr: np.ndarray, ox: float, oy: float, hx: float, hy: float, pts: np.ndarray):
    fx = (pts[:, 0] - ox) / hx
    fy = (pts[:, 1] - oy) / hy
    i0 = np.clip(np.floor(fx).astype(int), 0, arr.shape[0] - 2)
    j0 = np.clip(np.floor(fy).astype(int), 0, arr.shape[1] - 2)
    tx = np.clip(fx - i0, 0.0, 1.0)
    ty = np.clip(fy - j0, 0.0, 1.0)
    a = arr[i0, j0] * (1 - tx) + arr[i0 + 1, j0] * tx
    b = arr[i0, j0 + 1] * (1 - tx) + arr[i0 + 1, j0 + 1] * tx
    return a * (1 - ty) + b * ty


def sample_cell(grid: GridSpec, f: CellField, pts: np.ndarray):
    return _bilinear(f.data, 0.5 * grid.hx, 0.5 * grid.hy, grid.hx, grid.hy, pts)


def sample_velocity(grid: GridSpec, v: FaceField, pts: np.ndarray):
    ux = _bilinear(v.xcomp, 0.0, 0.5 * grid.hy, grid.hx, grid.hy, pts)
    uy = _bilinear(v.ycomp, 0.5 * grid.hx, 0.0, grid.hx, grid.hy, pts)
    return np.column_stack([ux, uy])


def stefan_flux_residual(
    grid: GridSpec,
    state: "State",
    c: Contour,
    contour_prev: Contour,
    dt: float,
    params: PhysParams,
) -> float:
    """Relative defect of the interfacial flux balance
    2(-V + u.nu) = m0 [grad mu . nu], averaged over the contour.

    V is estimated from nearest-vertex displacement between the two contours
    projected on the local normal; one-sided normal derivatives of mu are
    sampled outside the diffuse layer on both sides and linearly
    extrapolated to the interface.
    """
    pts = c.single()
    prev = contour_prev.single()
    if len(pts) < 8 or len(prev) < 8:
        raise ValueError("contours too short for correspondence")
    if not dt > 0.0:
        raise ValueError("dt must be positive")

    nxt = np.roll(pts, -1, axis=0)
    prv = np.roll(pts, 1, axis=0)
    tang = nxt - prv
    nrm = np.column_stack([tang[:, 1], -tang[:, 0]])
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    # orient normals toward the positive phase
    h = 0.5 * (grid.hx + grid.hy)
    phi_plus = sample_cell(grid, state.phase, pts + h * nrm)
    phi_minus = sample_cell(grid, state.phase, pts - h * nrm)
    flip = phi_plus < phi_minus
    nrm[flip] *= -1.0

    # normal interface velocity from nearest-vertex correspondence
    d2 = ((pts[:, None, :] - prev[None, :, :]) ** 2).sum(axis=2)
    nearest = prev[np.argmin(d2, axis=1)]
    mismatch = np.sqrt(d2.min(axis=1))
    extent = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if mismatch.max() > max(0.2 * extent, 4.0 * h):
        raise ValueError("contour correspondence failure")
    V = ((pts - nearest) * nrm).sum(axis=1) / dt

    un = (sample_velocity(grid, state.vel, pts) * nrm).sum(axis=1)

    gmu = grad_cell_to_face(grid, state.chem)

    def normal_flux(sample_pts, normals):
        gx = _bilinear(gmu.xcomp, 0.0, 0.5 * grid.hy, grid.hx, grid.hy, sample_pts)
        gy = _bilinear(gmu.ycomp, 0.5 * grid.hx, 0.0, grid.hx, grid.hy, sample_pts)
        return gx * normals[:, 0] + gy * normals[:, 1]

    s1 = 3.0 * params.eps + h
    s2 = s1 + 2.0 * h

    def extrapolated(side):
        g1 = normal_flux(pts + side * s1 * nrm, nrm)
        g2 = normal_flux(pts + side * s2 * nrm, nrm)
        return (s2 * g1 - s1 * g2) / (s2 - s1)

    jump = extrapolated(+1.0) - extrapolated(-1.0)
    lhs = 2.0 * (-V + un)
    rhs = params.mobility.m0 * jump
    # normalize by the size of the participating terms, not the net balance,
    # so a correct near-cancellation (e.g. pure transport) scores near zero
    scale = max(
        float(np.mean(2.0 * np.abs(V))),
        float(np.mean(2.0 * np.abs(un))),
        float(np.mean(np.abs(rhs))),
    )
    if scale == 0.0:
        return 0.0
    return float(np.mean(np.abs(lhs - rhs)) / scale)
