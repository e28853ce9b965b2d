"""Time integration of the full momentum equation and of its linear
(pressure-then-heat) reduction, on periodic and bounded domains.

Periodic runs march Fourier coefficients; bounded runs use collocated
nodes for the linear pipeline and the staggered projection stepper for
the full equation.  Integrators: classic rk4 (default), explicit Euler,
and an implicit-diffusion/explicit-transport Crank-Nicolson variant for
stiff viscosities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import bounded as _bnd
from .errors import BlowUpError, CFLError, ConstraintError, FieldMismatchError
from .fields import (
    COLLOCATED,
    STAGGERED,
    ScalarField,
    VectorField,
    boundary_flux,
    convective_term,
    curl,
    divergence,
    energy,
    gradient,
    l2_norm,
    to_collocated,
    volume_integral,
)
from .grid import GridSpec
from .spectral import DealiasPolicy, dealias_mask, forward, inverse, workspace

DIV_TOL = 1e-8
INIT_DIV_TOL = 1e-10
BLOWUP_ENERGY_FACTOR = 10.0

_INTEGRATORS = ("explicit_euler", "rk4", "imex_cn")


# ---------------------------------------------------------------------------
# run data

@dataclass(frozen=True)
class SolverConfig:
    """Viscosity, step sizes and integration policy for one run."""

    viscosity: float
    dt: float
    t_end: float
    integrator: str = "rk4"
    dealias: DealiasPolicy = dc_field(default_factory=DealiasPolicy.two_thirds)
    cfl_guard: float = 0.9

    def __post_init__(self):
        if not self.viscosity > 0.0:
            raise ValueError(f"viscosity must be positive, got {self.viscosity}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0.0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.integrator not in _INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not 0.0 < self.cfl_guard <= 1.0:
            raise ValueError(f"cfl_guard must lie in (0, 1], got {self.cfl_guard}")

    def validate_cfl(self, grid: GridSpec, vmax: float) -> None:
        """Advective and (for explicit integrators) diffusive step bounds."""
        hmin = min(grid.spacing)
        advective = self.cfl_guard * hmin / max(vmax, 1e-12)
        if self.dt > advective:
            raise CFLError(
                f"dt={self.dt:g} exceeds advective bound {advective:g} "
                f"(max speed {vmax:g}, min spacing {hmin:g})"
            )
        if self.integrator != "imex_cn":
            diffusive = self.cfl_guard * hmin * hmin / (2.0 * grid.dims * self.viscosity)
            if self.dt > diffusive:
                raise CFLError(
                    f"dt={self.dt:g} exceeds explicit diffusion bound {diffusive:g}"
                )

    def n_steps(self) -> int:
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))


def _power_law_factor(t: float, exponent: float) -> float:
    return float(max(t, 1.0)) ** (-exponent)


@dataclass(frozen=True)
class ForcingSpec:
    """Closed-form body force; canonical family decays like t^-K for t >= 1."""

    profile: object  # callable (*coords, t) -> tuple of component arrays
    decay_exponent: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.decay_exponent > 0.0:
            raise ValueError(f"decay exponent must be positive, got {self.decay_exponent}")

    @classmethod
    def zero(cls) -> "ForcingSpec":
        return cls(profile=None, decay_exponent=1.0, amplitude=0.0)

    @classmethod
    def power_law(cls, shape, decay_exponent: float, amplitude: float = 1.0) -> "ForcingSpec":
        """Separable force amplitude * shape(x) * max(t,1)^-K."""

        def profile(*args):
            *coords, t = args
            factor = _power_law_factor(t, decay_exponent)
            return tuple(factor * np.asarray(c, dtype=float) for c in shape(*coords))

        return cls(profile=profile, decay_exponent=decay_exponent, amplitude=amplitude)

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0.0 or self.profile is None

    def evaluate_component(self, grid: GridSpec, axis: int, location: str, t: float) -> np.ndarray:
        if self.is_zero:
            return np.zeros(grid.shape(location))
        mesh = grid.meshes(location)
        vals = self.profile(*mesh, t)[axis]
        return self.amplitude * np.broadcast_to(np.asarray(vals, dtype=float), grid.shape(location))

    def evaluate(self, grid: GridSpec, t: float, layout: str = COLLOCATED) -> VectorField:
        if layout == STAGGERED:
            comps = tuple(
                ScalarField(grid, self.evaluate_component(grid, a, f"face{a}", t), f"face{a}")
                for a in range(grid.dims)
            )
            return VectorField(grid, comps, STAGGERED)
        comps = tuple(
            ScalarField(grid, self.evaluate_component(grid, a, grid.default_location, t))
            for a in range(grid.dims)
        )
        return VectorField(grid, comps, COLLOCATED)

    def magnitude(self, grid: GridSpec, t: float) -> float:
        return self.evaluate(grid, t).max_abs()


@dataclass(frozen=True)
class BoundaryDatum:
    """Closed-form velocity on the box walls; K* > 1 for the canonical
    power-law family."""

    profile: object  # callable (*coords, t) -> tuple of component arrays
    decay_exponent: float = 2.0
    tangential_only: bool = False

    def __post_init__(self):
        if not self.decay_exponent > 1.0:
            raise ValueError(
                f"boundary decay exponent must exceed 1, got {self.decay_exponent}"
            )

    @classmethod
    def zero(cls) -> "BoundaryDatum":
        def profile(*args):
            *coords, _t = args
            z = np.zeros(np.broadcast_shapes(*(np.shape(c) for c in coords)))
            return tuple(z for _ in coords)

        return cls(profile=profile, tangential_only=True)

    @classmethod
    def power_law(cls, shape, decay_exponent: float, tangential_only: bool = False) -> "BoundaryDatum":
        def profile(*args):
            *coords, t = args
            factor = _power_law_factor(t, decay_exponent)
            return tuple(factor * np.asarray(c, dtype=float) for c in shape(*coords))

        return cls(profile=profile, decay_exponent=decay_exponent, tangential_only=tangential_only)

    def evaluate(self, grid: GridSpec, t: float, layout: str = COLLOCATED) -> VectorField:
        if layout == STAGGERED:
            comps = []
            for a in range(grid.dims):
                loc = f"face{a}"
                vals = self.profile(*grid.meshes(loc), t)[a]
                comps.append(ScalarField(grid, np.broadcast_to(np.asarray(vals, float), grid.shape(loc)), loc))
            return VectorField(grid, tuple(comps), STAGGERED)
        vals = self.profile(*grid.meshes(), t)
        comps = tuple(
            ScalarField(grid, np.broadcast_to(np.asarray(v, float), grid.shape(None)))
            for v in vals
        )
        return VectorField(grid, comps, COLLOCATED)

    def time_derivative_component(self, grid: GridSpec, axis: int, t: float,
                                  delta: float = 1e-6) -> np.ndarray:
        lo = self.profile(*grid.meshes(), max(t - delta, 0.0))[axis]
        hi = self.profile(*grid.meshes(), t + delta)[axis]
        span = (t + delta) - max(t - delta, 0.0)
        diff = (np.asarray(hi, float) - np.asarray(lo, float)) / span
        return np.broadcast_to(diff, grid.shape(None))


@dataclass(frozen=True)
class AnsatzSpec:
    """Separable velocity: scalar profile psi(x, t) times a direction u(t).

    Solenoidality of psi * u forces u . grad(psi) = 0; sampling validates
    that constraint discretely.
    """

    psi: object  # callable (*coords, t) -> array
    u: object    # callable (t) -> length-N sequence

    @classmethod
    def plane_wave(cls, grid_lengths, wavevector, amplitude=1.0, decay_rate=0.0, phase=0.0):
        """Sinusoidal profile along an integer wavevector, flow perpendicular
        to it (the only separable solenoidal family on the torus)."""
        wavevector = tuple(int(k) for k in wavevector)
        dims = len(wavevector)
        kappa = np.array(
            [k * 2.0 * np.pi / L for k, L in zip(wavevector, grid_lengths)]
        )
        norm = float(np.linalg.norm(kappa))
        if norm == 0.0:
            raise ValueError("wavevector must be nonzero")
        if dims == 2:
            direction = np.array([-kappa[1], kappa[0]]) / norm
        else:
            helper = np.array([0.0, 0.0, 1.0])
            if abs(kappa[2]) >= norm * 0.99:
                helper = np.array([1.0, 0.0, 0.0])
            direction = np.cross(kappa, helper)
            direction /= np.linalg.norm(direction)

        def psi(*args):
            *coords, t = args
            acc = np.asarray(phase, dtype=float)
            for ka, x in zip(kappa, coords):
                acc = acc + ka * x
            return np.sin(acc)

        def u(t):
            return amplitude * math.exp(-decay_rate * t) * direction

        return cls(psi=psi, u=u)

    @classmethod
    def shear_profile(cls, flow_axis, vary_axis, profile, dims=2,
                      amplitude=1.0, decay_rate=0.0):
        """Profile depending on one coordinate, flow along another axis.

        This is the only separable solenoidal family whose sampled
        divergence vanishes exactly under one-sided box differencing.
        """
        if flow_axis == vary_axis:
            raise ValueError("flow axis must differ from the profile axis")

        def psi(*args):
            *coords, t = args
            return profile(coords[vary_axis])

        direction = np.zeros(dims)
        direction[flow_axis] = 1.0

        def u(t):
            return amplitude * math.exp(-decay_rate * t) * direction

        return cls(psi=psi, u=u)


def sample_ansatz(spec: AnsatzSpec, grid: GridSpec, t: float) -> VectorField:
    """Pointwise samples of psi(x,t) u(t); rejects non-solenoidal pairs."""
    psi_vals = np.broadcast_to(
        np.asarray(spec.psi(*grid.meshes(), t), dtype=float), grid.shape(None)
    )
    uvec = np.asarray(spec.u(t), dtype=float)
    if uvec.shape != (grid.dims,):
        raise ConstraintError(f"u(t) must have {grid.dims} components")
    psi_field = ScalarField(grid, psi_vals)
    grad_psi = gradient(psi_field)
    defect = np.zeros(grid.shape(None))
    for a in range(grid.dims):
        defect = defect + uvec[a] * grad_psi.components[a].values
    worst = float(np.max(np.abs(defect)))
    if worst > 1e-10:
        raise ConstraintError(
            f"ansatz is not solenoidal on this grid: max |u . grad psi| = {worst:.3e}"
        )
    comps = tuple(ScalarField(grid, psi_vals * uvec[a]) for a in range(grid.dims))
    return VectorField(grid, comps, COLLOCATED)


@dataclass(frozen=True)
class SampleDiagnostics:
    energy: float
    div_max: float
    conv_residual: float
    enstrophy: float
    boundary_flux: float


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of one run, with per-sample diagnostics."""

    grid: GridSpec
    times: tuple[float, ...]
    velocities: tuple[VectorField, ...]
    pressures: tuple[ScalarField, ...]
    diagnostics: tuple[SampleDiagnostics, ...]
    div_tolerance: float = DIV_TOL

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "velocities", tuple(self.velocities))
        object.__setattr__(self, "pressures", tuple(self.pressures))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample times must be strictly increasing")
        worst = max((d.div_max for d in self.diagnostics), default=0.0)
        if worst > self.div_tolerance:
            raise ValueError(
                f"snapshot divergence {worst:.3e} exceeds tolerance {self.div_tolerance:.1e}"
            )

    @property
    def final_velocity(self) -> VectorField:
        return self.velocities[-1]


def sample_diagnostics(v: VectorField) -> SampleDiagnostics:
    w = curl(v)
    if isinstance(w, ScalarField):
        ens = volume_integral(w * w)
    else:
        ens = energy(w)
    return SampleDiagnostics(
        energy=energy(v),
        div_max=divergence(v).max_abs(),
        conv_residual=_conv_residual(v),
        enstrophy=ens,
        boundary_flux=boundary_flux(v),
    )


def _conv_residual(v: VectorField) -> float:
    from .spectral import leray_project  # local import keeps module layering flat

    conv = convective_term(v)
    if v.grid.periodic_domain:
        conv = leray_project(conv)
    return l2_norm(conv)


# ---------------------------------------------------------------------------
# spectral drivers

def _stack_spectral(v: VectorField) -> np.ndarray:
    return np.stack([forward(v.grid, c.values) for c in v.components])


def _unstack_spectral(grid: GridSpec, vhat: np.ndarray) -> VectorField:
    comps = tuple(ScalarField(grid, inverse(grid, vhat[a]), "cell") for a in range(grid.dims))
    return VectorField(grid, comps, COLLOCATED)


def _spectral_energy(grid: GridSpec, ws, vhat: np.ndarray) -> float:
    m = float(np.prod(grid.cells))
    total = 0.0
    for a in range(grid.dims):
        total += float(np.sum(ws.rfft_weight * np.abs(vhat[a]) ** 2))
    return grid.volume * total / (m * m)


def _forcing_hat(grid, ws, forcing, t):
    return np.stack(
        [forward(grid, forcing.evaluate_component(grid, a, "cell", t)) for a in range(grid.dims)]
    )


def _pressure_hat(ws, source_hat) -> np.ndarray:
    """Modes of p solving lap p = div(source)."""
    div = ws.ik[0] * source_hat[0]
    for a in range(1, source_hat.shape[0]):
        div = div + ws.ik[a] * source_hat[a]
    return -div * ws.inv_ksq


def _subtract_gradient(ws, source_hat, phat) -> np.ndarray:
    out = np.empty_like(source_hat)
    for a in range(source_hat.shape[0]):
        out[a] = source_hat[a] - ws.ik[a] * phat
    return out


def _reduced_rhs_factory(grid, ws, cfg, forcing):
    mu = cfg.viscosity

    if forcing is None or forcing.is_zero:
        def rhs(t, vhat):
            return -mu * ws.ksq * vhat
        return rhs

    def rhs(t, vhat):
        fhat = _forcing_hat(grid, ws, forcing, t)
        phat = _pressure_hat(ws, fhat)
        out = _subtract_gradient(ws, fhat, phat)
        out -= mu * ws.ksq * vhat
        return out

    return rhs


def _nse_rhs_factory(grid, ws, cfg, forcing):
    mu = cfg.viscosity
    mask = dealias_mask(grid, cfg.dealias)
    dims = grid.dims

    def transport_hat(t, vhat):
        vphys = [inverse(grid, vhat[a]) for a in range(dims)]
        conv = np.empty_like(vhat)
        for i in range(dims):
            acc = vphys[0] * inverse(grid, ws.ik[0] * vhat[i])
            for j in range(1, dims):
                acc += vphys[j] * inverse(grid, ws.ik[j] * vhat[i])
            conv[i] = forward(grid, acc)
        if mask is not None:
            conv *= mask
        if forcing is not None and not forcing.is_zero:
            total = _forcing_hat(grid, ws, forcing, t) - conv
        else:
            total = -conv
        phat = _pressure_hat(ws, total)
        return _subtract_gradient(ws, total, phat)

    def rhs(t, vhat):
        return transport_hat(t, vhat) - mu * ws.ksq * vhat

    return rhs, transport_hat


def _advance(rhs, t, y, dt, integrator, imex_parts=None):
    """One explicit step, or the CN-diffusion IMEX step when parts given."""
    if integrator == "imex_cn":
        transport, mu, ksq = imex_parts
        expl = transport(t, y)
        half = 0.5 * dt * mu * ksq
        return (y * (1.0 - half) + dt * expl) / (1.0 + half)
    if integrator == "explicit_euler":
        return y + dt * rhs(t, y)
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_initial_divergence(v0: VectorField):
    worst = divergence(v0).max_abs()
    if worst > INIT_DIV_TOL:
        raise ConstraintError(
            f"initial velocity is not solenoidal: max divergence {worst:.3e}"
        )


def _run_spectral(v0, forcing, cfg, sample_every, nse: bool) -> Trajectory:
    grid = v0.grid
    ws = workspace(grid)
    cfg.validate_cfl(grid, v0.max_abs())
    _check_initial_divergence(v0)

    if nse:
        rhs, transport = _nse_rhs_factory(grid, ws, cfg, forcing)
    else:
        rhs = _reduced_rhs_factory(grid, ws, cfg, forcing)
        transport = None

    imex_parts = None
    if cfg.integrator == "imex_cn":
        if nse:
            imex_parts = (transport, cfg.viscosity, ws.ksq)
        else:
            def sources_only(t, y):
                if forcing is None or forcing.is_zero:
                    return np.zeros_like(y)
                fhat = _forcing_hat(grid, ws, forcing, t)
                return _subtract_gradient(ws, fhat, _pressure_hat(ws, fhat))

            imex_parts = (sources_only, cfg.viscosity, ws.ksq)

    vhat = _stack_spectral(v0)
    e0 = max(_spectral_energy(grid, ws, vhat), 1e-300)

    times, vels, press, diags = [], [], [], []

    def take_sample(t):
        v = _unstack_spectral(grid, vhat)
        if nse:
            p = _nse_pressure(grid, ws, cfg, forcing, vhat, t)
        else:
            p = _reduced_pressure(grid, ws, forcing, t)
        times.append(t)
        vels.append(v)
        press.append(p)
        diags.append(sample_diagnostics(v))

    n_steps = cfg.n_steps()
    take_sample(0.0)
    for step in range(n_steps):
        t = step * cfg.dt
        vhat = _advance(rhs, t, vhat, cfg.dt, cfg.integrator, imex_parts)
        t_next = (step + 1) * cfg.dt
        if np.any(np.isnan(vhat)):
            raise BlowUpError(f"NaN detected at t={t_next:.6g}", t_next)
        e = _spectral_energy(grid, ws, vhat)
        if e > BLOWUP_ENERGY_FACTOR * e0:
            raise BlowUpError(
                f"energy grew to {e:.3e} (>{BLOWUP_ENERGY_FACTOR:g}x initial) at t={t_next:.6g}",
                t_next,
            )
        if (step + 1) % sample_every == 0 or step + 1 == n_steps:
            take_sample(t_next)

    return Trajectory(grid, times, vels, press, diags)


def _reduced_pressure(grid, ws, forcing, t) -> ScalarField:
    if forcing is None or forcing.is_zero:
        return ScalarField.zeros(grid, "cell")
    fhat = _forcing_hat(grid, ws, forcing, t)
    phat = _pressure_hat(ws, fhat)
    return ScalarField(grid, inverse(grid, phat), "cell")


def _nse_pressure(grid, ws, cfg, forcing, vhat, t) -> ScalarField:
    mask = dealias_mask(grid, cfg.dealias)
    dims = grid.dims
    vphys = [inverse(grid, vhat[a]) for a in range(dims)]
    conv = np.empty_like(vhat)
    for i in range(dims):
        acc = vphys[0] * inverse(grid, ws.ik[0] * vhat[i])
        for j in range(1, dims):
            acc += vphys[j] * inverse(grid, ws.ik[j] * vhat[i])
        conv[i] = forward(grid, acc)
    if mask is not None:
        conv *= mask
    if forcing is not None and not forcing.is_zero:
        total = _forcing_hat(grid, ws, forcing, t) - conv
    else:
        total = -conv
    phat = _pressure_hat(ws, total)
    return ScalarField(grid, inverse(grid, phat), "cell")


def step_nse_spectral(state: VectorField, t: float, f: ForcingSpec, cfg: SolverConfig) -> VectorField:
    """One integrator step of the projected momentum equation on the torus."""
    grid = state.grid
    if not grid.periodic_domain:
        raise FieldMismatchError("spectral stepping needs a periodic torus")
    cfg.validate_cfl(grid, state.max_abs())
    _check_initial_divergence(state)
    ws = workspace(grid)
    rhs, transport = _nse_rhs_factory(grid, ws, cfg, f)
    imex_parts = (transport, cfg.viscosity, ws.ksq) if cfg.integrator == "imex_cn" else None
    vhat = _stack_spectral(state)
    vhat = _advance(rhs, t, vhat, cfg.dt, cfg.integrator, imex_parts)
    if np.any(np.isnan(vhat)):
        raise BlowUpError(f"NaN detected at t={t + cfg.dt:.6g}", t + cfg.dt)
    return _unstack_spectral(grid, vhat)


# ---------------------------------------------------------------------------
# bounded drivers

def _run_reduced_bounded(v0, forcing, bc, cfg, sample_every) -> Trajectory:
    grid = v0.grid
    cfg.validate_cfl(grid, v0.max_abs())
    _check_initial_divergence(v0)
    poisson = _bnd.node_poisson(grid)
    mu = cfg.viscosity
    dims = grid.dims
    state = np.stack([np.array(c.values) for c in to_collocated(v0).components])

    def apply_datum(arr, t):
        vals = bc.evaluate(grid, t)
        for a in range(dims):
            for axis in range(dims):
                sl = [slice(None)] * dims
                for side, idx in ((0, 0), (1, -1)):
                    sl[axis] = idx
                    arr[a][tuple(sl)] = vals.components[a].values[tuple(sl)]

    def node_laplacian(arr):
        out = np.zeros_like(arr)
        for a in range(dims):
            comp = ScalarField(grid, arr[a])
            from .fields import _laplacian_values

            out[a] = _laplacian_values(comp)
        return out

    def pressure_field(t, arr) -> np.ndarray:
        lap = node_laplacian(arr)
        if forcing is not None and not forcing.is_zero:
            fvals = np.stack(
                [forcing.evaluate_component(grid, a, "node", t) for a in range(dims)]
            )
            rhs_div = divergence(
                VectorField(grid, tuple(ScalarField(grid, fvals[a]) for a in range(dims)))
            ).values
        else:
            fvals = None
            rhs_div = np.zeros(grid.shape("node"))
        normal_data = {}
        for axis in range(dims):
            for side in (0, 1):
                sign = -1.0 if side == 0 else 1.0
                sl = [slice(None)] * dims
                sl[axis] = 0 if side == 0 else -1
                sl = tuple(sl)
                g = mu * lap[axis][sl] - bc.time_derivative_component(grid, axis, t)[sl]
                if fvals is not None:
                    g = g + fvals[axis][sl]
                normal_data[(axis, side)] = sign * g
        return poisson.solve(rhs_div, normal_data)

    def rhs(t, arr, include_diffusion=True):
        work = arr.copy()
        apply_datum(work, t)
        if include_diffusion:
            out = mu * node_laplacian(work)
        else:
            out = np.zeros_like(work)
        p = pressure_field(t, work)
        gp = gradient(ScalarField(grid, p))
        for a in range(dims):
            out[a] -= gp.components[a].values
            if forcing is not None and not forcing.is_zero:
                out[a] += forcing.evaluate_component(grid, a, "node", t)
        # walls are pinned to the datum; their rate comes from the datum itself
        for a in range(dims):
            for axis in range(dims):
                for idx in (0, -1):
                    sl = [slice(None)] * dims
                    sl[axis] = idx
                    out[a][tuple(sl)] = 0.0
        return out

    e0 = max(float(np.sum(state**2)), 1e-300)
    times, vels, press, diags = [], [], [], []

    def take_sample(t):
        arr = state.copy()
        apply_datum(arr, t)
        v = VectorField(grid, tuple(ScalarField(grid, arr[a]) for a in range(dims)))
        p = ScalarField(grid, pressure_field(t, arr))
        times.append(t)
        vels.append(v)
        press.append(p)
        diags.append(sample_diagnostics(v))

    if cfg.integrator == "imex_cn":
        stepper = _ImexBoundedStepper(grid, mu, cfg.dt)
    n_steps = cfg.n_steps()
    take_sample(0.0)
    for step in range(n_steps):
        t = step * cfg.dt
        if cfg.integrator == "imex_cn":
            explicit = rhs(t, state, include_diffusion=False)
            state = stepper.step(state, explicit, rhs, t)
        else:
            state = _advance(rhs, t, state, cfg.dt, cfg.integrator)
        apply_datum(state, (step + 1) * cfg.dt)
        t_next = (step + 1) * cfg.dt
        if np.any(np.isnan(state)):
            raise BlowUpError(f"NaN detected at t={t_next:.6g}", t_next)
        if float(np.sum(state**2)) > BLOWUP_ENERGY_FACTOR * e0:
            raise BlowUpError(f"energy blow-up at t={t_next:.6g}", t_next)
        if (step + 1) % sample_every == 0 or step + 1 == n_steps:
            take_sample(t_next)

    # collocated differencing keeps the field solenoidal only to scheme
    # order: the wall-normal pressure data carries O(h^2) noise that the
    # velocity integrates over time
    h2 = min(grid.spacing) ** 2
    tol = max(DIV_TOL, h2 * max(1.0, v0.max_abs()) * (1.0 + cfg.t_end))
    return Trajectory(grid, times, vels, press, diags, div_tolerance=tol)


class _ImexBoundedStepper:
    """Crank-Nicolson diffusion with explicit sources on box nodes."""

    def __init__(self, grid: GridSpec, mu: float, dt: float):
        import scipy.sparse
        import scipy.sparse.linalg

        self.grid = grid
        shape = grid.shape("node")
        size = int(np.prod(shape))
        eye = [scipy.sparse.identity(m, format="csr") for m in shape]
        lap = None
        for axis, (m, h) in enumerate(zip(shape, grid.spacing)):
            main = np.full(m, -2.0)
            off = np.ones(m - 1)
            a = scipy.sparse.diags([off, main, off], [-1, 0, 1], format="csr") / (h * h)
            term = None
            for other in range(grid.dims):
                block = a if other == axis else eye[other]
                term = block if term is None else scipy.sparse.kron(term, block, format="csr")
            lap = term if lap is None else lap + term
        self.lap = lap.tocsr()
        boundary = np.zeros(shape, dtype=bool)
        for axis in range(grid.dims):
            sl = [slice(None)] * grid.dims
            for idx in (0, -1):
                sl[axis] = idx
                boundary[tuple(sl)] = True
        self.boundary = boundary.reshape(-1)
        op = scipy.sparse.identity(size, format="lil") - 0.5 * dt * mu * self.lap
        for i in np.nonzero(self.boundary)[0]:
            op.rows[i] = [i]
            op.data[i] = [1.0]
        self._lu = scipy.sparse.linalg.splu(op.tocsc())
        self.mu = mu
        self.dt = dt
        self.shape = shape

    def step(self, state: np.ndarray, explicit: np.ndarray, rhs_full, t: float) -> np.ndarray:
        out = np.empty_like(state)
        for a in range(state.shape[0]):
            flat = state[a].reshape(-1)
            b = flat + 0.5 * self.dt * self.mu * (self.lap @ flat) + self.dt * explicit[a].reshape(-1)
            b[self.boundary] = flat[self.boundary]  # walls re-pinned after the step
            out[a] = self._lu.solve(b).reshape(self.shape)
        return out


def _run_nse_mac(v0, forcing, bc, cfg, sample_every) -> Trajectory:
    grid = v0.grid
    if cfg.integrator == "imex_cn":
        raise ConstraintError(
            "imex_cn is not available on the staggered stepper; use rk4 or explicit_euler"
        )
    cfg.validate_cfl(grid, v0.max_abs())
    state = _bnd.mac_state_from_field(v0)
    worst = float(np.max(np.abs(_bnd.mac_divergence(grid, state))))
    if worst > INIT_DIV_TOL:
        raise ConstraintError(
            f"initial staggered velocity is not solenoidal: max divergence {worst:.3e}"
        )
    _bnd.apply_normal_datum(grid, state, bc, 0.0)

    e0 = max(sum(float(np.sum(a * a)) for a in state), 1e-300)
    times, vels, press, diags = [], [], [], []

    def take_sample(t, phi):
        v = _bnd.mac_field_from_state(grid, state)
        p = ScalarField(grid, phi, "cell")
        times.append(t)
        vels.append(v)
        press.append(p)
        diags.append(sample_diagnostics(v))

    n_steps = cfg.n_steps()
    take_sample(0.0, np.zeros(grid.cells))
    for step in range(n_steps):
        t = step * cfg.dt
        state, phi = _bnd.mac_step(
            grid, state, t, cfg.dt, cfg.viscosity, forcing, bc, cfg.integrator
        )
        t_next = (step + 1) * cfg.dt
        if any(np.any(np.isnan(a)) for a in state):
            raise BlowUpError(f"NaN detected at t={t_next:.6g}", t_next)
        if sum(float(np.sum(a * a)) for a in state) > BLOWUP_ENERGY_FACTOR * e0:
            raise BlowUpError(f"energy blow-up at t={t_next:.6g}", t_next)
        if (step + 1) % sample_every == 0 or step + 1 == n_steps:
            take_sample(t_next, phi)

    return Trajectory(grid, times, vels, press, diags)


def step_nse_mac(state: VectorField, t: float, f: ForcingSpec, bc: BoundaryDatum,
                 cfg: SolverConfig):
    """One projected step on the staggered box grid; returns (velocity, pressure)."""
    grid = state.grid
    if cfg.integrator == "imex_cn":
        raise ConstraintError(
            "imex_cn is not available on the staggered stepper; use rk4 or explicit_euler"
        )
    cfg.validate_cfl(grid, state.max_abs())
    arrays = _bnd.mac_state_from_field(state)
    _bnd.apply_normal_datum(grid, arrays, bc, t)
    new_state, phi = _bnd.mac_step(grid, arrays, t, cfg.dt, cfg.viscosity, f, bc, cfg.integrator)
    if any(np.any(np.isnan(a)) for a in new_state):
        raise BlowUpError(f"NaN detected at t={t + cfg.dt:.6g}", t + cfg.dt)
    return _bnd.mac_field_from_state(grid, new_state), ScalarField(grid, phi, "cell")


# ---------------------------------------------------------------------------
# public entry points

def solve_reduced(v0: VectorField, f: ForcingSpec | None, bc: BoundaryDatum | None,
                  cfg: SolverConfig, sample_every: int = 1) -> Trajectory:
    """March the linear pipeline: pressure from the force divergence, then
    diffusion with that pressure gradient and the force as sources."""
    if v0.grid.periodic_domain:
        if bc is not None:
            raise FieldMismatchError("periodic runs take no boundary datum")
        return _run_spectral(v0, f, cfg, sample_every, nse=False)
    if bc is None:
        raise ConstraintError("bounded runs need a boundary datum")
    return _run_reduced_bounded(v0, f, bc, cfg, sample_every)


def run_nse(v0: VectorField, f: ForcingSpec | None, bc: BoundaryDatum | None,
            cfg: SolverConfig, sample_every: int = 1) -> Trajectory:
    """March the full momentum equation with projection onto solenoidal fields."""
    if v0.grid.periodic_domain:
        if bc is not None:
            raise FieldMismatchError("periodic runs take no boundary datum")
        return _run_spectral(v0, f, cfg, sample_every, nse=True)
    if bc is None:
        raise ConstraintError("bounded runs need a boundary datum")
    return _run_nse_mac(v0, f, bc, cfg, sample_every)
