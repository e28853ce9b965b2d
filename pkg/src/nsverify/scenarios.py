"""The scenario library: named initial data, forcing and wall data.

Every scenario's initial field is solenoidal to 1e-10 on its grid by
construction (random fields are projected).  Box variants pair the initial
field with the wall values of the matching closed-form solution so the
decay oracles stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fields import (
    COLLOCATED,
    STAGGERED,
    VectorField,
    divergence,
    l2_norm,
)
from .grid import GridSpec
from .solvers import AnsatzSpec, BoundaryDatum, ForcingSpec
from .spectral import leray_project

SCENARIO_NAMES = ("shear", "taylor_green", "two_mode", "ansatz_custom", "random_solenoidal")

FORCING_PROFILES = ("none", "shear_mode", "gradient_mode")


@dataclass(frozen=True)
class Scenario:
    """One named experiment setup."""

    name: str
    grid: GridSpec
    viscosity: float
    forcing: ForcingSpec
    boundary: BoundaryDatum | None
    seed: int | None = None
    amplitude: float = 1.0
    normal_inflow: float = 0.0

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario {self.name!r}")
        if self.name == "random_solenoidal" and self.seed is None:
            raise ConfigError("random_solenoidal needs scenario.seed")
        if not self.grid.periodic_domain and self.name in ("two_mode", "random_solenoidal"):
            raise ConfigError(f"scenario {self.name!r} is defined on the torus only")

    # -- initial data --------------------------------------------------------

    def initial_velocity(self, layout: str = COLLOCATED) -> VectorField:
        if layout == STAGGERED and self.grid.periodic_domain:
            raise ConfigError("staggered layout exists only on the box")
        fn = self._profile_at(0.0, include_inflow=False)
        v = VectorField.from_function(self.grid, fn, layout=layout)
        if self.name in ("two_mode", "random_solenoidal"):
            v = leray_project(v)
            norm = l2_norm(v)
            v = v * (self.amplitude / norm)
        div = divergence(v).values
        if layout == COLLOCATED and not self.grid.periodic_domain:
            # one-sided wall stencils do not cancel for fields whose normal
            # derivatives survive at the wall; the interior is the contract
            div = div[tuple(slice(1, -1) for _ in range(self.grid.dims))]
        worst = float(np.max(np.abs(div)))
        if worst > 1e-10 * max(1.0, v.max_abs()):
            raise ConfigError(
                f"scenario initial field is not solenoidal: max divergence {worst:.3e}"
            )
        return v

    def ansatz(self) -> AnsatzSpec | None:
        mu = self.viscosity
        if self.name == "shear":
            if self.grid.periodic_domain:
                k = 2.0 * np.pi / self.grid.lengths[1]
                return AnsatzSpec.shear_profile(
                    0, 1, profile=lambda y: np.sin(k * y),
                    amplitude=self.amplitude, decay_rate=mu * k * k,
                )
            k = np.pi / self.grid.lengths[1]
            return AnsatzSpec.shear_profile(
                0, 1, profile=lambda y: np.sin(k * y),
                amplitude=self.amplitude, decay_rate=mu * k * k,
            )
        if self.name == "ansatz_custom":
            if self.grid.periodic_domain:
                kappa_sq = sum((2.0 * np.pi / L) ** 2 for L in self.grid.lengths[:2])
                return AnsatzSpec.plane_wave(
                    self.grid.lengths, (1, -1) + (0,) * (self.grid.dims - 2),
                    amplitude=self.amplitude * np.sqrt(2.0),
                    decay_rate=mu * kappa_sq,
                )
            k = np.pi / self.grid.lengths[1]
            return AnsatzSpec.shear_profile(
                0, 1, profile=lambda y: np.sin(k * y),
                amplitude=self.amplitude, decay_rate=mu * k * k,
            )
        return None

    def _profile_at(self, t: float, include_inflow: bool = True):
        """Closed-form velocity at time t as a sampling function.

        The deliberate normal inflow (a compatibility violation used to test
        the harness) enters only the wall datum, never the initial field.
        """
        mu = self.viscosity
        amp = self.amplitude
        name = self.name
        grid = self.grid
        inflow = self.normal_inflow if include_inflow else 0.0

        if name == "shear":
            if grid.periodic_domain:
                k = 2.0 * np.pi / grid.lengths[1]
            else:
                k = np.pi / grid.lengths[1]
            decay = np.exp(-mu * k * k * t)

            def fn(*coords):
                shape = np.broadcast_shapes(*(np.shape(c) for c in coords))
                u = np.broadcast_to(amp * decay * np.sin(k * coords[1]), shape)
                zeros = np.zeros(shape)
                comps = [u] + [zeros] * (grid.dims - 1)
                if inflow != 0.0:
                    comps[0] = comps[0] + inflow * (1.0 - coords[0] / grid.lengths[0])
                return tuple(comps)

            return fn

        if name == "taylor_green":
            if grid.periodic_domain:
                kx = 2.0 * np.pi / grid.lengths[0]
                ky = 2.0 * np.pi / grid.lengths[1]
            else:
                kx = np.pi / grid.lengths[0]
                ky = np.pi / grid.lengths[1]
            decay = np.exp(-mu * (kx * kx + ky * ky) * t)

            def fn(*coords):
                shape = np.broadcast_shapes(*(np.shape(c) for c in coords))
                x, y = coords[0], coords[1]
                scale = amp * decay
                if not grid.periodic_domain:
                    scale = scale * np.pi  # wall-aligned vortex from the stream function
                u = np.broadcast_to(scale * np.sin(kx * x) * np.cos(ky * y), shape)
                v = np.broadcast_to(-scale * np.cos(kx * x) * np.sin(ky * y), shape)
                comps = [u, v] + [np.zeros(shape)] * (grid.dims - 2)
                if inflow != 0.0:
                    comps[0] = comps[0] + inflow * (1.0 - x / grid.lengths[0])
                return tuple(comps)

            return fn

        if name == "two_mode":
            k1 = 2.0 * np.pi / grid.lengths[1]
            k2 = 4.0 * np.pi / grid.lengths[0]

            def fn(*coords):
                shape = np.broadcast_shapes(*(np.shape(c) for c in coords))
                u = np.broadcast_to(np.sin(k1 * coords[1]), shape)
                v = np.broadcast_to(np.sin(k2 * coords[0]), shape)
                return (u, v) + (np.zeros(shape),) * (grid.dims - 2)

            return fn

        if name == "ansatz_custom":
            spec = self.ansatz()

            def fn(*coords):
                shape = np.broadcast_shapes(*(np.shape(c) for c in coords))
                psi = np.broadcast_to(spec.psi(*coords, t), shape)
                uvec = np.asarray(spec.u(t))
                return tuple(psi * uvec[a] for a in range(grid.dims))

            return fn

        if name == "random_solenoidal":
            rng = np.random.default_rng(np.uint64(self.seed))
            kmax = 4
            freq = [np.fft.fftfreq(n, 1.0 / n) for n in grid.cells]
            keep = np.ones(grid.cells, dtype=bool)
            for axis, f in enumerate(freq):
                sh = [1] * grid.dims
                sh[axis] = f.size
                keep &= np.abs(f).reshape(sh) <= kmax
            fields = []
            for _ in range(grid.dims):
                spec = np.fft.fftn(rng.normal(size=grid.cells))
                spec[~keep] = 0.0
                fields.append(np.real(np.fft.ifftn(spec)))

            def fn(*coords):
                shape = np.broadcast_shapes(*(np.shape(c) for c in coords))
                # closed over precomputed samples; valid on this grid only
                return tuple(np.broadcast_to(f, shape) for f in fields)

            return fn

        raise ConfigError(f"unknown scenario {name!r}")

    # -- wall data -----------------------------------------------------------

    def boundary_datum(self) -> BoundaryDatum | None:
        if self.grid.periodic_domain:
            return None
        if self.boundary is not None:
            return self.boundary
        scenario = self

        def profile(*args):
            *coords, t = args
            return scenario._profile_at(t)(*coords)

        tangential = self.name == "taylor_green" and self.normal_inflow == 0.0
        return BoundaryDatum(profile=profile, decay_exponent=2.0, tangential_only=tangential)


def build_forcing(profile: str, amplitude: float, decay_exponent: float,
                  grid: GridSpec) -> ForcingSpec:
    if profile == "none" or amplitude == 0.0:
        return ForcingSpec.zero()
    if profile == "shear_mode":
        k = 2.0 * np.pi / grid.lengths[1] if grid.periodic_domain else np.pi / grid.lengths[1]

        def shape(*coords):
            sh = np.broadcast_shapes(*(np.shape(c) for c in coords))
            u = np.broadcast_to(np.sin(k * coords[1]), sh)
            return (u,) + (np.zeros(sh),) * (len(coords) - 1)

        return ForcingSpec.power_law(shape, decay_exponent, amplitude)
    if profile == "gradient_mode":
        ks = [2.0 * np.pi / L if grid.periodic_domain else np.pi / L for L in grid.lengths]

        def shape(*coords):
            sh = np.broadcast_shapes(*(np.shape(c) for c in coords))
            x, y = coords[0], coords[1]
            gx = ks[0] * np.cos(ks[0] * x) * np.sin(ks[1] * y)
            gy = ks[1] * np.sin(ks[0] * x) * np.cos(ks[1] * y)
            out = (np.broadcast_to(gx, sh), np.broadcast_to(gy, sh))
            return out + (np.zeros(sh),) * (len(coords) - 2)

        return ForcingSpec.power_law(shape, decay_exponent, amplitude)
    raise ConfigError(f"unknown forcing profile {profile!r}")
