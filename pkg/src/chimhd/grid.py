"""Staggered (MAC) grid and discrete operators.

Layout on the rectangle (0, lx) x (0, ly):

  - scalars (phase, chemical potential, pressure, electric potential) live
    at cell centers, array shape (nx, ny);
  - vector fields (velocity, current density, fluxes) store their normal
    components on faces: xcomp on vertical faces, shape (nx+1, ny), and
    ycomp on horizontal faces, shape (nx, ny+1).

All operators are built so that the discrete gradient and divergence are
exact negative adjoints under the uniform-weight inner products below
(summation by parts), the viscous operator is the exact gradient of the
discrete strain-energy quadratic form (hence symmetric negative
semi-definite), and the convection operator is exactly skew-symmetric in
the transported field.  Those identities are what carry energy stability
and charge conservation over from the continuous model.

Boundary conventions: homogeneous Neumann for cell scalars, no-slip for
velocity, zero normal component for the current density.  Admissible face
fields therefore carry exact zeros on boundary-normal entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular staggered grid on (0, lx) x (0, ly)."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError("grid needs nx >= 4 and ny >= 4")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain extents must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def cell_centers(self):
        """Meshgrid (X, Y) of cell-center coordinates, shape (nx, ny)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def xface_coords(self):
        x = np.arange(self.nx + 1) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def yface_coords(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")


@dataclass
class CellField:
    """Cell-centered scalar field, values shape (nx, ny)."""

    data: np.ndarray

    @classmethod
    def zeros(cls, grid: GridSpec) -> "CellField":
        return cls(np.zeros((grid.nx, grid.ny)))

    @classmethod
    def full(cls, grid: GridSpec, value: float) -> "CellField":
        return cls(np.full((grid.nx, grid.ny), float(value)))

    def copy(self) -> "CellField":
        return CellField(self.data.copy())


@dataclass
class FaceField:
    """Face-normal vector components: xcomp (nx+1, ny), ycomp (nx, ny+1)."""

    xcomp: np.ndarray
    ycomp: np.ndarray

    @classmethod
    def zeros(cls, grid: GridSpec) -> "FaceField":
        return cls(np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    def copy(self) -> "FaceField":
        return FaceField(self.xcomp.copy(), self.ycomp.copy())

    def zero_boundary(self) -> "FaceField":
        """Zero the boundary-normal entries in place; returns self."""
        self.xcomp[0, :] = 0.0
        self.xcomp[-1, :] = 0.0
        self.ycomp[:, 0] = 0.0
        self.ycomp[:, -1] = 0.0
        return self

    def max_boundary_normal(self) -> float:
        return max(
            np.abs(self.xcomp[0, :]).max(initial=0.0),
            np.abs(self.xcomp[-1, :]).max(initial=0.0),
            np.abs(self.ycomp[:, 0]).max(initial=0.0),
            np.abs(self.ycomp[:, -1]).max(initial=0.0),
        )


# ---------------------------------------------------------------------------
# inner products

def cell_inner(grid: GridSpec, a: CellField, b: CellField) -> float:
    return grid.cell_volume * float(np.vdot(a.data, b.data))


def face_inner(grid: GridSpec, a: FaceField, b: FaceField) -> float:
    return grid.cell_volume * (
        float(np.vdot(a.xcomp, b.xcomp)) + float(np.vdot(a.ycomp, b.ycomp))
    )


def cell_sum(grid: GridSpec, a: CellField) -> float:
    """Integral of a cell field: sum(values) * hx * hy."""
    return grid.cell_volume * float(a.data.sum())


# ---------------------------------------------------------------------------
# first-order operators

def grad_cell_to_face(grid: GridSpec, f: CellField) -> FaceField:
    """Two-point gradient; boundary faces carry 0 (homogeneous Neumann)."""
    out = FaceField.zeros(grid)
    out.xcomp[1:-1, :] = (f.data[1:, :] - f.data[:-1, :]) / grid.hx
    out.ycomp[:, 1:-1] = (f.data[:, 1:] - f.data[:, :-1]) / grid.hy
    return out


def div_face_to_cell(grid: GridSpec, v: FaceField) -> CellField:
    """Per-cell flux balance of a face field."""
    out = (v.xcomp[1:, :] - v.xcomp[:-1, :]) / grid.hx
    out = out + (v.ycomp[:, 1:] - v.ycomp[:, :-1]) / grid.hy
    return CellField(out)


def laplacian_neumann(grid: GridSpec, f: CellField) -> CellField:
    """div(grad f): the 5-point Neumann Laplacian (symmetric NSD)."""
    return div_face_to_cell(grid, grad_cell_to_face(grid, f))


def interp_cell_to_face(grid: GridSpec, f: CellField, mode: str = "arithmetic") -> FaceField:
    """Two-point face average of a cell scalar; boundary faces copy the cell.

    mode "harmonic" requires strictly positive input.
    """
    if mode not in ("arithmetic", "harmonic"):
        raise ValueError(f"unknown interpolation mode {mode!r}")
    d = f.data
    out = FaceField.zeros(grid)
    if mode == "arithmetic":
        out.xcomp[1:-1, :] = 0.5 * (d[1:, :] + d[:-1, :])
        out.ycomp[:, 1:-1] = 0.5 * (d[:, 1:] + d[:, :-1])
    else:
        if np.any(d <= 0.0):
            raise ValueError("harmonic interpolation requires positive values")
        out.xcomp[1:-1, :] = 2.0 / (1.0 / d[1:, :] + 1.0 / d[:-1, :])
        out.ycomp[:, 1:-1] = 2.0 / (1.0 / d[:, 1:] + 1.0 / d[:, :-1])
    out.xcomp[0, :] = d[0, :]
    out.xcomp[-1, :] = d[-1, :]
    out.ycomp[:, 0] = d[:, 0]
    out.ycomp[:, -1] = d[:, -1]
    return out


def cell_to_node(grid: GridSpec, f: CellField) -> np.ndarray:
    """Node values by arithmetic average of adjacent cells, shape (nx+1, ny+1).

    Edge/corner nodes average the 2/1 available cells, so the result stays
    within [min f, max f].
    """
    pad = np.pad(f.data, 1, mode="edge")
    return 0.25 * (pad[:-1, :-1] + pad[1:, :-1] + pad[:-1, 1:] + pad[1:, 1:])


def ycomp_at_xfaces(grid: GridSpec, v: FaceField) -> np.ndarray:
    """4-point average of ycomp onto interior x-faces; boundary columns 0."""
    out = np.zeros((grid.nx + 1, grid.ny))
    y = v.ycomp
    out[1:-1, :] = 0.25 * (y[:-1, :-1] + y[:-1, 1:] + y[1:, :-1] + y[1:, 1:])
    return out


def xcomp_at_yfaces(grid: GridSpec, v: FaceField) -> np.ndarray:
    """4-point average of xcomp onto interior y-faces; boundary rows 0."""
    out = np.zeros((grid.nx, grid.ny + 1))
    x = v.xcomp
    out[:, 1:-1] = 0.25 * (x[:-1, :-1] + x[1:, :-1] + x[:-1, 1:] + x[1:, 1:])
    return out


# ---------------------------------------------------------------------------
# strain components (used by the viscous operator and the dissipation
# quadrature; the no-slip wall enters through ghost reflection, which doubles
# the one-sided tangential derivative at wall nodes)

def strain_components(grid: GridSpec, u: FaceField):
    """Return (exx, eyy, tau): normal strains at cells, shear at nodes.

    tau = du/dy + dv/dx at grid nodes; |D(u)|^2 = exx^2 + eyy^2 + tau^2/2.
    """
    hx, hy = grid.hx, grid.hy
    ux, uy = u.xcomp, u.ycomp
    exx = (ux[1:, :] - ux[:-1, :]) / hx
    eyy = (uy[:, 1:] - uy[:, :-1]) / hy
    tau = np.zeros((grid.nx + 1, grid.ny + 1))
    # du/dy at nodes
    tau[:, 1:-1] += (ux[:, 1:] - ux[:, :-1]) / hy
    tau[:, 0] += 2.0 * ux[:, 0] / hy
    tau[:, -1] += -2.0 * ux[:, -1] / hy
    # dv/dx at nodes
    tau[1:-1, :] += (uy[1:, :] - uy[:-1, :]) / hx
    tau[0, :] += 2.0 * uy[0, :] / hx
    tau[-1, :] += -2.0 * uy[-1, :] / hx
    return exx, eyy, tau


def strain_energy(grid: GridSpec, eta_cell: CellField, u: FaceField) -> float:
    """Discrete integral of 2*eta*|D(u)|^2 (the viscous dissipation form)."""
    exx, eyy, tau = strain_components(grid, u)
    eta_n = cell_to_node(grid, eta_cell)
    q = 2.0 * np.sum(eta_cell.data * (exx**2 + eyy**2)) + np.sum(eta_n * tau**2)
    return grid.cell_volume * float(q)


def viscous_apply(grid: GridSpec, eta_cell: CellField, u: FaceField) -> FaceField:
    """Apply the variable-viscosity operator 2 div(eta D(u)) with no-slip walls.

    The operator is the (negative) gradient of strain_energy/2, so it is
    symmetric and <-viscous_apply(eta,u), u> equals strain_energy exactly.
    Output is zero on boundary faces (they are constrained, not unknowns).
    """
    if np.any(eta_cell.data <= 0.0):
        raise ValueError("viscosity must be positive everywhere")
    hx, hy = grid.hx, grid.hy
    exx, eyy, tau = strain_components(grid, u)
    eta_c = eta_cell.data
    g = cell_to_node(grid, eta_cell) * tau
    # wall nodes carry the doubled ghost coefficient on both sides of the form
    ky = np.ones(grid.ny + 1)
    ky[0] = ky[-1] = 2.0
    kx = np.ones(grid.nx + 1)
    kx[0] = kx[-1] = 2.0
    out = FaceField.zeros(grid)
    fx = 2.0 * eta_c * exx
    out.xcomp[1:-1, :] = (fx[1:, :] - fx[:-1, :]) / hx
    out.xcomp[1:-1, :] += (g[1:-1, 1:] * ky[1:] - g[1:-1, :-1] * ky[:-1]) / hy
    fy = 2.0 * eta_c * eyy
    out.ycomp[:, 1:-1] = (fy[:, 1:] - fy[:, :-1]) / hy
    out.ycomp[:, 1:-1] += (g[1:, 1:-1] * kx[1:, None] - g[:-1, 1:-1] * kx[:-1, None]) / hx
    return out


# ---------------------------------------------------------------------------
# convection

def _dual_velocities_x(grid: GridSpec, a: FaceField):
    """Advecting velocities on the dual faces of the x-face lattice."""
    ae = 0.5 * (a.xcomp[:-1, :] + a.xcomp[1:, :])          # at cells (nx, ny)
    an = np.zeros((grid.nx + 1, grid.ny + 1))              # at nodes
    an[1:-1, :] = 0.5 * (a.ycomp[:-1, :] + a.ycomp[1:, :])
    return ae, an


def _dual_velocities_y(grid: GridSpec, a: FaceField):
    """Advecting velocities on the dual faces of the y-face lattice."""
    an = 0.5 * (a.ycomp[:, :-1] + a.ycomp[:, 1:])          # at cells (nx, ny)
    ae = np.zeros((grid.nx + 1, grid.ny + 1))              # at nodes
    ae[:, 1:-1] = 0.5 * (a.xcomp[:, :-1] + a.xcomp[:, 1:])
    return an, ae


def convect(grid: GridSpec, u_adv: FaceField, w: FaceField) -> FaceField:
    """Skew-symmetric convection C(u_adv) w.

    Centered divergence-form fluxes minus (div u_adv) w / 2 on each face
    lattice; <convect(a, w), w> = 0 exactly for every a, w with zero
    boundary-normal entries in w.
    """
    hx, hy = grid.hx, grid.hy
    out = FaceField.zeros(grid)

    q = w.xcomp
    ae, an = _dual_velocities_x(grid, u_adv)
    qpy = np.pad(q, ((0, 0), (1, 1)))                      # ghost rows of zeros
    flux_e = ae * 0.5 * (q[:-1, :] + q[1:, :])             # (nx, ny)
    flux_n = an * 0.5 * (qpy[:, :-1] + qpy[:, 1:])         # (nx+1, ny+1)
    diva = np.zeros_like(q)
    diva[1:-1, :] = (ae[1:, :] - ae[:-1, :]) / hx + (an[1:-1, 1:] - an[1:-1, :-1]) / hy
    out.xcomp[1:-1, :] = (flux_e[1:, :] - flux_e[:-1, :]) / hx
    out.xcomp[1:-1, :] += (flux_n[1:-1, 1:] - flux_n[1:-1, :-1]) / hy
    out.xcomp[1:-1, :] -= 0.5 * diva[1:-1, :] * q[1:-1, :]

    q = w.ycomp
    an, ae = _dual_velocities_y(grid, u_adv)
    qpx = np.pad(q, ((1, 1), (0, 0)))
    flux_n = an * 0.5 * (q[:, :-1] + q[:, 1:])             # (nx, ny)
    flux_e = ae * 0.5 * (qpx[:-1, :] + qpx[1:, :])         # (nx+1, ny+1)
    diva = np.zeros_like(q)
    diva[:, 1:-1] = (an[:, 1:] - an[:, :-1]) / hy + (ae[1:, 1:-1] - ae[:-1, 1:-1]) / hx
    out.ycomp[:, 1:-1] = (flux_n[:, 1:] - flux_n[:, :-1]) / hy
    out.ycomp[:, 1:-1] += (flux_e[1:, 1:-1] - flux_e[:-1, 1:-1]) / hx
    out.ycomp[:, 1:-1] -= 0.5 * diva[:, 1:-1] * q[:, 1:-1]
    return out


# ---------------------------------------------------------------------------
# packing and assembled operator matrices (consumed by the time stepper)

def n_xfaces(grid: GridSpec) -> int:
    return (grid.nx + 1) * grid.ny


def n_yfaces(grid: GridSpec) -> int:
    return grid.nx * (grid.ny + 1)


def pack_faces(grid: GridSpec, v: FaceField) -> np.ndarray:
    return np.concatenate([v.xcomp.ravel(), v.ycomp.ravel()])


def unpack_faces(grid: GridSpec, vec: np.ndarray) -> FaceField:
    nxf = n_xfaces(grid)
    return FaceField(
        vec[:nxf].reshape(grid.nx + 1, grid.ny).copy(),
        vec[nxf:].reshape(grid.nx, grid.ny + 1).copy(),
    )


@lru_cache(maxsize=None)
def interior_face_indices(grid: GridSpec) -> np.ndarray:
    """Indices of interior (unconstrained) faces in the packed face vector."""
    mx = np.zeros((grid.nx + 1, grid.ny), dtype=bool)
    mx[1:-1, :] = True
    my = np.zeros((grid.nx, grid.ny + 1), dtype=bool)
    my[:, 1:-1] = True
    mask = np.concatenate([mx.ravel(), my.ravel()])
    return np.flatnonzero(mask)


@lru_cache(maxsize=None)
def grad_matrix(grid: GridSpec) -> sp.csr_matrix:
    """Sparse gradient, packed faces x cells; rows of boundary faces are zero."""
    nx, ny = grid.nx, grid.ny
    cell = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []
    xf = np.arange((nx + 1) * ny).reshape(nx + 1, ny)
    r = xf[1:-1, :].ravel()
    rows += [r, r]
    cols += [cell[1:, :].ravel(), cell[:-1, :].ravel()]
    vals += [np.full(r.size, 1.0 / grid.hx), np.full(r.size, -1.0 / grid.hx)]
    yf = np.arange(nx * (ny + 1)).reshape(nx, ny + 1) + (nx + 1) * ny
    r = yf[:, 1:-1].ravel()
    rows += [r, r]
    cols += [cell[:, 1:].ravel(), cell[:, :-1].ravel()]
    vals += [np.full(r.size, 1.0 / grid.hy), np.full(r.size, -1.0 / grid.hy)]
    n_faces = (nx + 1) * ny + nx * (ny + 1)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_faces, nx * ny),
    )


@lru_cache(maxsize=None)
def div_matrix(grid: GridSpec) -> sp.csr_matrix:
    """Sparse divergence, cells x packed faces; equals -grad_matrix^T."""
    return (-grad_matrix(grid).T).tocsr()


@lru_cache(maxsize=None)
def stiffness_matrix(grid: GridSpec) -> sp.csr_matrix:
    """grad^T grad on cells: minus the Neumann Laplacian, SPD up to constants."""
    G = grad_matrix(grid)
    return (G.T @ G).tocsr()


@lru_cache(maxsize=None)
def _strain_matrices(grid: GridSpec):
    """Primitive difference matrices for the viscous form.

    Ax: cells x xfaces (d/dx), By: cells x yfaces (d/dy),
    Ty: nodes x xfaces (du/dy with wall-doubled entries),
    Tx: nodes x yfaces (dv/dx with wall-doubled entries).
    """
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.hx, grid.hy
    cell = np.arange(nx * ny).reshape(nx, ny)
    node = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    xf = np.arange((nx + 1) * ny).reshape(nx + 1, ny)
    yf = np.arange(nx * (ny + 1)).reshape(nx, ny + 1)

    r = cell.ravel()
    Ax = sp.csr_matrix(
        (
            np.concatenate([np.full(r.size, 1.0 / hx), np.full(r.size, -1.0 / hx)]),
            (np.concatenate([r, r]), np.concatenate([xf[1:, :].ravel(), xf[:-1, :].ravel()])),
        ),
        shape=(nx * ny, (nx + 1) * ny),
    )
    By = sp.csr_matrix(
        (
            np.concatenate([np.full(r.size, 1.0 / hy), np.full(r.size, -1.0 / hy)]),
            (np.concatenate([r, r]), np.concatenate([yf[:, 1:].ravel(), yf[:, :-1].ravel()])),
        ),
        shape=(nx * ny, nx * (ny + 1)),
    )

    rows, cols, vals = [], [], []
    r = node[:, 1:-1].ravel()
    rows += [r, r]
    cols += [xf[:, 1:].ravel(), xf[:, :-1].ravel()]
    vals += [np.full(r.size, 1.0 / hy), np.full(r.size, -1.0 / hy)]
    r = node[:, 0].ravel()
    rows.append(r)
    cols.append(xf[:, 0].ravel())
    vals.append(np.full(r.size, 2.0 / hy))
    r = node[:, -1].ravel()
    rows.append(r)
    cols.append(xf[:, -1].ravel())
    vals.append(np.full(r.size, -2.0 / hy))
    Ty = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=((nx + 1) * (ny + 1), (nx + 1) * ny),
    )

    rows, cols, vals = [], [], []
    r = node[1:-1, :].ravel()
    rows += [r, r]
    cols += [yf[1:, :].ravel(), yf[:-1, :].ravel()]
    vals += [np.full(r.size, 1.0 / hx), np.full(r.size, -1.0 / hx)]
    r = node[0, :].ravel()
    rows.append(r)
    cols.append(yf[0, :].ravel())
    vals.append(np.full(r.size, 2.0 / hx))
    r = node[-1, :].ravel()
    rows.append(r)
    cols.append(yf[-1, :].ravel())
    vals.append(np.full(r.size, -2.0 / hx))
    Tx = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=((nx + 1) * (ny + 1), nx * (ny + 1)),
    )
    return Ax, By, Ty, Tx


def viscous_matrix(grid: GridSpec, eta_cell: CellField) -> sp.csr_matrix:
    """Assemble -2 div(eta D(.)) on packed faces: symmetric positive semi-def.

    Agrees with -viscous_apply on admissible fields; rows/columns of boundary
    faces describe the constrained entries and are masked off by the caller.
    """
    Ax, By, Ty, Tx = _strain_matrices(grid)
    ec = sp.diags(2.0 * eta_cell.data.ravel())
    en = sp.diags(cell_to_node(grid, eta_cell).ravel())
    Vxx = Ax.T @ ec @ Ax + Ty.T @ en @ Ty
    Vyy = By.T @ ec @ By + Tx.T @ en @ Tx
    Vxy = Ty.T @ en @ Tx
    return sp.bmat([[Vxx, Vxy], [Vxy.T, Vyy]], format="csr")


def convection_matrix(grid: GridSpec, u_adv: FaceField) -> sp.csr_matrix:
    """Assemble the skew-symmetric convection operator C(u_adv) on packed faces.

    Matches convect(grid, u_adv, .) on admissible fields (boundary rows zero).
    """
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.hx, grid.hy
    xf = np.arange((nx + 1) * ny).reshape(nx + 1, ny)
    yf = np.arange(nx * (ny + 1)).reshape(nx, ny + 1) + (nx + 1) * ny
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(v.ravel())

    # x-face lattice; the diagonal entries of the centered fluxes cancel the
    # -(div a)/2 correction exactly, so only paired +/- couplings remain
    ae, an = _dual_velocities_x(grid, u_adv)
    r = xf[1:-1, :]
    add(r, xf[2:, :], 0.5 * ae[1:, :] / hx)
    add(r, xf[:-2, :], -0.5 * ae[:-1, :] / hx)
    add(r[:, :-1], xf[1:-1, 1:], 0.5 * an[1:-1, 1:-1] / hy)
    add(r[:, 1:], xf[1:-1, :-1], -0.5 * an[1:-1, 1:-1] / hy)

    # y-face lattice
    an, ae = _dual_velocities_y(grid, u_adv)
    r = yf[:, 1:-1]
    add(r, yf[:, 2:], 0.5 * an[:, 1:] / hy)
    add(r, yf[:, :-2], -0.5 * an[:, :-1] / hy)
    add(r[:-1, :], yf[1:, 1:-1], 0.5 * ae[1:-1, 1:-1] / hx)
    add(r[1:, :], yf[:-1, 1:-1], -0.5 * ae[1:-1, 1:-1] / hx)

    n_faces = (nx + 1) * ny + nx * (ny + 1)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_faces, n_faces),
    )
