import hypothesis
import numpy as np
import pytest

from chimhd.grid import CellField, FaceField, GridSpec

hypothesis.settings.register_profile("fast", max_examples=15, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=80, deadline=None)
hypothesis.settings.load_profile("fast")


def random_cell(grid: GridSpec, rng) -> CellField:
    return CellField(rng.standard_normal((grid.nx, grid.ny)))


def random_face(grid: GridSpec, rng, admissible: bool = True) -> FaceField:
    f = FaceField(
        rng.standard_normal((grid.nx + 1, grid.ny)),
        rng.standard_normal((grid.nx, grid.ny + 1)),
    )
    if admissible:
        f.zero_boundary()
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
