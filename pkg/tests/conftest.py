import numpy as np
import pytest

from nsverify.fields import ScalarField, VectorField
from nsverify.grid import GridSpec


@pytest.fixture
def torus64():
    return GridSpec.periodic(64)


@pytest.fixture
def torus32():
    return GridSpec.periodic(32)


@pytest.fixture
def box64():
    return GridSpec.box(64)


@pytest.fixture
def box32():
    return GridSpec.box(32)


def taylor_green(grid):
    """Classical cellular vortex; its self-transport is a pure gradient."""
    return VectorField.from_function(
        grid, lambda x, y: (np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y))
    )


def shear(grid):
    return VectorField.from_function(grid, lambda x, y: (np.sin(y), np.zeros_like(x + y)))


def random_smooth_scalar(grid, seed, kmax=3):
    """Band-limited random scalar, reproducible from the seed."""
    rng = np.random.default_rng(seed)
    xs = grid.meshes()
    vals = np.zeros(grid.shape(None))
    for _ in range(6):
        k = rng.integers(-kmax, kmax + 1, size=grid.dims)
        amp = rng.normal()
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.zeros_like(vals)
        for axis, x in enumerate(xs):
            scale = 2 * np.pi / grid.lengths[axis] if grid.periodic_domain else np.pi / grid.lengths[axis]
            wave = wave + k[axis] * scale * x
        vals = vals + amp * np.sin(wave + phase)
    return ScalarField(grid, vals)
