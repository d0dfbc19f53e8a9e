import numpy as np
import pytest
from hypothesis import given, strategies as st

from chimhd.grid import (
    CellField,
    FaceField,
    GridSpec,
    cell_inner,
    cell_sum,
    cell_to_node,
    convect,
    convection_matrix,
    div_face_to_cell,
    div_matrix,
    face_inner,
    grad_cell_to_face,
    grad_matrix,
    interior_face_indices,
    interp_cell_to_face,
    laplacian_neumann,
    pack_faces,
    strain_energy,
    stiffness_matrix,
    viscous_apply,
    viscous_matrix,
)
from conftest import random_cell, random_face

grids = st.builds(
    GridSpec,
    nx=st.integers(4, 12),
    ny=st.integers(4, 12),
    lx=st.floats(0.5, 2.0),
    ly=st.floats(0.5, 2.0),
)
seeds = st.integers(0, 2**32 - 1)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(3, 8)
    with pytest.raises(ValueError):
        GridSpec(8, 8, lx=-1.0)


def test_grad_of_constant_is_zero():
    grid = GridSpec(8, 8)
    g = grad_cell_to_face(grid, CellField.full(grid, 3.7))
    assert np.all(g.xcomp == 0.0) and np.all(g.ycomp == 0.0)


def test_grad_linear_field():
    grid = GridSpec(8, 8)
    x, _ = grid.cell_centers()
    g = grad_cell_to_face(grid, CellField(x))
    assert np.allclose(g.xcomp[1:-1, :], 1.0, atol=1e-13)
    assert np.all(g.xcomp[0, :] == 0.0) and np.all(g.xcomp[-1, :] == 0.0)
    assert np.allclose(g.ycomp, 0.0)


@given(grids, seeds)
def test_summation_by_parts(grid, seed):
    rng = np.random.default_rng(seed)
    f = random_cell(grid, rng)
    v = random_face(grid, rng)
    lhs = face_inner(grid, grad_cell_to_face(grid, f), v)
    rhs = cell_inner(grid, f, div_face_to_cell(grid, v))
    assert abs(lhs + rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_div_zero_and_total_flux(rng):
    grid = GridSpec(9, 7)
    assert np.all(div_face_to_cell(grid, FaceField.zeros(grid)).data == 0.0)
    for _ in range(10):
        v = random_face(grid, rng)
        assert abs(cell_sum(grid, div_face_to_cell(grid, v))) < 1e-13


def test_div_grad_equals_laplacian_and_kernel(rng):
    grid = GridSpec(8, 6)
    f = random_cell(grid, rng)
    a = div_face_to_cell(grid, grad_cell_to_face(grid, f)).data
    b = laplacian_neumann(grid, f).data
    assert np.array_equal(a, b)
    # constants in the kernel == zero row sums of the assembled operator
    L = (div_matrix(grid) @ grad_matrix(grid)).toarray()
    assert np.abs(L.sum(axis=1)).max() < 1e-12
    assert np.abs(laplacian_neumann(grid, CellField.full(grid, 2.5)).data).max() == 0.0


def test_laplacian_nsd(rng):
    grid = GridSpec(10, 5)
    for _ in range(20):
        f = random_cell(grid, rng)
        assert cell_inner(grid, f, laplacian_neumann(grid, f)) <= 1e-12


def test_laplacian_refinement_ratio():
    # cosine mode: discrete eigenvalue approaches -(pi/lx)^2 at O(h^2)
    errs = []
    for nx in (128, 256):
        grid = GridSpec(nx, 4)
        x, _ = grid.cell_centers()
        f = CellField(np.cos(np.pi * x / grid.lx))
        lf = laplacian_neumann(grid, f).data
        errs.append(np.abs(lf + (np.pi / grid.lx) ** 2 * f.data).max())
    ratio = errs[0] / errs[1]
    assert 3.5 < ratio < 4.5


def test_interp_modes():
    grid = GridSpec(4, 4)
    assert np.allclose(interp_cell_to_face(grid, CellField.full(grid, 3.0)).xcomp, 3.0)
    f = CellField.full(grid, 1.0)
    f.data[1, :] = 2.0
    ar = interp_cell_to_face(grid, f, "arithmetic")
    ha = interp_cell_to_face(grid, f, "harmonic")
    assert ar.xcomp[1, 0] == pytest.approx(1.5)
    assert ha.xcomp[1, 0] == pytest.approx(4.0 / 3.0)
    with pytest.raises(ValueError):
        interp_cell_to_face(grid, CellField.full(grid, -1.0), "harmonic")
    with pytest.raises(ValueError):
        interp_cell_to_face(grid, f, "cubic")


@given(grids, seeds)
def test_harmonic_below_arithmetic(grid, seed):
    rng = np.random.default_rng(seed)
    f = CellField(rng.uniform(0.1, 5.0, (grid.nx, grid.ny)))
    ar = interp_cell_to_face(grid, f, "arithmetic")
    ha = interp_cell_to_face(grid, f, "harmonic")
    assert np.all(ha.xcomp <= ar.xcomp + 1e-14)
    assert np.all(ha.ycomp <= ar.ycomp + 1e-14)


def test_cell_to_node_bounds(rng):
    grid = GridSpec(6, 9)
    f = random_cell(grid, rng)
    n = cell_to_node(grid, f)
    assert n.shape == (grid.nx + 1, grid.ny + 1)
    assert n.min() >= f.data.min() - 1e-14 and n.max() <= f.data.max() + 1e-14


def test_viscous_zero_and_error(rng):
    grid = GridSpec(6, 6)
    eta = CellField.full(grid, 1.0)
    out = viscous_apply(grid, eta, FaceField.zeros(grid))
    assert np.all(out.xcomp == 0.0) and np.all(out.ycomp == 0.0)
    with pytest.raises(ValueError):
        viscous_apply(grid, CellField.full(grid, 0.0), FaceField.zeros(grid))


@given(grids, seeds)
def test_viscous_symmetry_and_form(grid, seed):
    rng = np.random.default_rng(seed)
    eta = CellField(rng.uniform(0.2, 3.0, (grid.nx, grid.ny)))
    u, v = random_face(grid, rng), random_face(grid, rng)
    Lu, Lv = viscous_apply(grid, eta, u), viscous_apply(grid, eta, v)
    a, b = face_inner(grid, Lu, v), face_inner(grid, u, Lv)
    assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)
    q = strain_energy(grid, eta, u)
    assert q >= 0.0
    assert abs(-face_inner(grid, Lu, u) - q) <= 1e-12 * max(q, 1.0)


def test_viscous_blocks_rigid_translation():
    # constant interior velocity with no-slip walls is not a rigid motion of
    # the discrete system: the wall shear layer dissipates
    grid = GridSpec(8, 8)
    u = FaceField.zeros(grid)
    u.xcomp[1:-1, :] = 1.0
    out = viscous_apply(grid, CellField.full(grid, 1.0), u)
    assert np.abs(out.xcomp[1:-1, 0]).max() > 0.0
    assert np.abs(out.xcomp[2:-2, 1:-1]).max() < 1e-12  # away from walls untouched
    assert -face_inner(grid, out, u) > 0.0


def test_convect_zero_adv(rng):
    grid = GridSpec(7, 5)
    w = random_face(grid, rng)
    out = convect(grid, FaceField.zeros(grid), w)
    assert np.abs(out.xcomp).max() == 0.0 and np.abs(out.ycomp).max() == 0.0


@given(grids, seeds)
def test_convect_skew_symmetry(grid, seed):
    rng = np.random.default_rng(seed)
    a, w = random_face(grid, rng), random_face(grid, rng)
    val = face_inner(grid, convect(grid, a, w), w)
    assert abs(val) <= 1e-12 * max(face_inner(grid, w, w), 1.0)


def test_convect_linearity(rng):
    grid = GridSpec(6, 8)
    a = random_face(grid, rng)
    w1, w2 = random_face(grid, rng), random_face(grid, rng)
    c1, c2 = 1.7, -0.4
    combo = FaceField(c1 * w1.xcomp + c2 * w2.xcomp, c1 * w1.ycomp + c2 * w2.ycomp)
    lhs = convect(grid, a, combo)
    r1, r2 = convect(grid, a, w1), convect(grid, a, w2)
    assert np.allclose(lhs.xcomp, c1 * r1.xcomp + c2 * r2.xcomp, atol=1e-13)
    assert np.allclose(lhs.ycomp, c1 * r1.ycomp + c2 * r2.ycomp, atol=1e-13)


def test_assembled_matrices_match_operators(rng):
    grid = GridSpec(7, 6, 1.3, 0.8)
    f = random_cell(grid, rng)
    v = random_face(grid, rng)
    assert np.allclose(
        grad_matrix(grid) @ f.data.ravel(),
        pack_faces(grid, grad_cell_to_face(grid, f)),
        atol=1e-14,
    )
    assert np.allclose(
        div_matrix(grid) @ pack_faces(grid, v),
        div_face_to_cell(grid, v).data.ravel(),
        atol=1e-13,
    )
    # stiffness = -laplacian
    assert np.allclose(
        stiffness_matrix(grid) @ f.data.ravel(),
        -laplacian_neumann(grid, f).data.ravel(),
        atol=1e-12,
    )
    idx = interior_face_indices(grid)
    eta = CellField(rng.uniform(0.5, 2.0, (grid.nx, grid.ny)))
    mv = (viscous_matrix(grid, eta) @ pack_faces(grid, v))[idx]
    ov = pack_faces(grid, viscous_apply(grid, eta, v))[idx]
    assert np.allclose(mv, -ov, atol=1e-11)
    a = random_face(grid, rng)
    cm = (convection_matrix(grid, a) @ pack_faces(grid, v))[idx]
    co = pack_faces(grid, convect(grid, a, v))[idx]
    assert np.allclose(cm, co, atol=1e-12)
    C = convection_matrix(grid, a)[idx][:, idx]
    assert abs(C + C.T).max() == 0.0
