"""Fourier machinery on the periodic torus.

Transforms, spectral inversion of the Laplacian with a zero-mean gauge,
projection onto divergence-free fields, and dealiasing of quadratic
products.  Grids are restricted to power-of-two cells, so any FFT backend
works; numpy's is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FieldMismatchError, SolvabilityError
from .fields import ScalarField, VectorField, divergence, gradient
from .grid import GridSpec

POISSON_MEAN_TOL = 1e-10


@dataclass(frozen=True)
class DealiasPolicy:
    """Which modes of a quadratic product are kept."""

    rule: str = "two_thirds"

    def __post_init__(self):
        if self.rule not in ("none", "two_thirds"):
            raise ValueError(f"unknown dealias rule {self.rule!r}")

    @classmethod
    def none(cls) -> "DealiasPolicy":
        return cls("none")

    @classmethod
    def two_thirds(cls) -> "DealiasPolicy":
        return cls("two_thirds")


class _Workspace:
    """Cached wavenumber arrays for one grid, rfftn layout."""

    def __init__(self, grid: GridSpec):
        dims = grid.dims
        cells = grid.cells
        ik = []
        ksq = np.zeros([n if a < dims - 1 else n // 2 + 1 for a, n in enumerate(cells)])
        keep = np.ones_like(ksq, dtype=bool)
        for axis, (n, L) in enumerate(zip(cells, grid.lengths)):
            if axis < dims - 1:
                freq = np.fft.fftfreq(n, d=1.0 / n)
            else:
                freq = np.fft.rfftfreq(n, d=1.0 / n)
            k = 2.0 * np.pi * freq / L
            k_first = k.copy()
            if n % 2 == 0 and axis < dims - 1:
                k_first[n // 2] = 0.0  # unpaired Nyquist mode carries no odd derivative
            elif n % 2 == 0:
                k_first[-1] = 0.0
            shape = [1] * dims
            shape[axis] = k.size
            ik.append(1j * k_first.reshape(shape))
            ksq = ksq + (k * k).reshape(shape)
            keep = keep & (np.abs(freq).reshape(shape) <= n / 3.0)
        self.ik = ik
        self.ksq = ksq
        inv = np.zeros_like(ksq)
        nz = ksq > 0.0
        inv[nz] = 1.0 / ksq[nz]
        self.inv_ksq = inv
        self.dealias_keep = keep
        # half-spectrum column weights for Parseval sums
        n_last = cells[-1]
        w = np.full(n_last // 2 + 1, 2.0)
        w[0] = 1.0
        if n_last % 2 == 0:
            w[-1] = 1.0
        shape = [1] * dims
        shape[-1] = w.size
        self.rfft_weight = w.reshape(shape)


_WORKSPACES: dict[tuple, _Workspace] = {}


def workspace(grid: GridSpec) -> _Workspace:
    if not grid.periodic_domain:
        raise FieldMismatchError("spectral operations need a periodic torus")
    key = (grid.dims, grid.cells, grid.lengths)
    ws = _WORKSPACES.get(key)
    if ws is None:
        ws = _Workspace(grid)
        _WORKSPACES[key] = ws
    return ws


def forward(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    return np.fft.rfftn(values, s=grid.cells, axes=range(grid.dims))


def inverse(grid: GridSpec, spec: np.ndarray) -> np.ndarray:
    return np.fft.irfftn(spec, s=grid.cells, axes=range(grid.dims))


@dataclass(frozen=True)
class SpectralField:
    """Complex Fourier coefficients of a real torus field.

    The full conjugate-symmetric layout is stored; symmetry is exact by
    construction when built via :meth:`from_real`.
    """

    grid: GridSpec
    modes: np.ndarray

    def __post_init__(self):
        if not self.grid.periodic_domain:
            raise FieldMismatchError("spectral fields exist only on the torus")
        arr = np.array(self.modes, dtype=np.complex128, copy=True)
        if arr.shape != self.grid.cells:
            raise FieldMismatchError(
                f"mode shape {arr.shape} does not match grid {self.grid.cells}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "modes", arr)

    @classmethod
    def from_real(cls, s: ScalarField) -> "SpectralField":
        grid = s.grid
        n_last = grid.cells[-1]
        half = forward(grid, s.values)
        full = np.zeros(grid.cells, dtype=np.complex128)
        full[..., : n_last // 2 + 1] = half
        # mirror the interior columns so conjugate symmetry holds exactly
        block = half[..., 1 : (n_last + 1) // 2]
        mirror = np.conj(block[..., ::-1])
        for axis in range(grid.dims - 1):
            mirror = np.roll(np.flip(mirror, axis=axis), 1, axis=axis)
        full[..., n_last // 2 + 1 :] = mirror
        return cls(grid, full)

    def to_real(self) -> ScalarField:
        n_last = self.grid.cells[-1]
        half = self.modes[..., : n_last // 2 + 1]
        return ScalarField(self.grid, inverse(self.grid, half), "cell")


def dealias_mask(grid: GridSpec, policy: DealiasPolicy) -> np.ndarray | None:
    if policy.rule == "none":
        return None
    return workspace(grid).dealias_keep


def dealias_product(a: ScalarField, b: ScalarField, policy: DealiasPolicy) -> ScalarField:
    """Pointwise product with modes above the 2/3 cutoff removed."""
    if a.grid != b.grid:
        raise FieldMismatchError("product factors live on different grids")
    prod = a.values * b.values
    mask = dealias_mask(a.grid, policy)
    if mask is None:
        return ScalarField(a.grid, prod, a.location)
    spec = forward(a.grid, prod)
    spec[~mask] = 0.0
    return ScalarField(a.grid, inverse(a.grid, spec), a.location)


def solve_poisson_periodic(rhs: ScalarField) -> ScalarField:
    """Invert the Laplacian on the torus with a zero-mean gauge.

    The torus problem is solvable only for zero-mean sources; the solution
    is unique up to a constant, fixed here by zero mean.
    """
    grid = rhs.grid
    ws = workspace(grid)
    mean = float(np.mean(rhs.values))
    if abs(mean) > POISSON_MEAN_TOL:
        raise SolvabilityError(
            f"source must have zero mean on the torus; measured mean {mean:.3e}"
        )
    spec = forward(grid, rhs.values)
    spec *= -ws.inv_ksq
    spec.flat[0] = 0.0
    return ScalarField(grid, inverse(grid, spec), rhs.location)


def leray_project(v: VectorField) -> VectorField:
    """Remove the gradient part of a torus field, leaving it divergence-free."""
    div = divergence(v)
    p = solve_poisson_periodic(div)
    return v - gradient(p)
