"""Bounded-box machinery: node-centred Neumann Poisson solves and the
staggered (MAC) momentum stepper with pressure projection.

The cell-centred projection Poisson problem is diagonalised exactly by the
type-II cosine transform, so corrected velocities are discretely
divergence-free to solver precision.  The node-centred Neumann problem
(pressure of the linear pipeline) uses a ghost-eliminated 5-point operator,
which is symmetric under the trapezoid inner product; compatibility is
enforced by removing the weighted mean of the source.
"""

from __future__ import annotations

import numpy as np
import scipy.fft
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConstraintError, SolvabilityError
from .fields import STAGGERED, ScalarField, VectorField
from .grid import GridSpec

_NODE_SOLVERS: dict[tuple, "NodeNeumannPoisson"] = {}
_DCT_EIGS: dict[tuple, np.ndarray] = {}

MAC_FLUX_TOL = 1e-8


# ---------------------------------------------------------------------------
# cell-centred Poisson with homogeneous Neumann walls (projection step)

def _dct_eigenvalues(grid: GridSpec) -> np.ndarray:
    key = (grid.cells, grid.lengths)
    eig = _DCT_EIGS.get(key)
    if eig is None:
        eig = np.zeros(grid.cells)
        for axis, (n, h) in enumerate(zip(grid.cells, grid.spacing)):
            lam = (2.0 * np.cos(np.pi * np.arange(n) / n) - 2.0) / (h * h)
            shape = [1] * grid.dims
            shape[axis] = n
            eig = eig + lam.reshape(shape)
        _DCT_EIGS[key] = eig
    return eig


def solve_poisson_cells_neumann(grid: GridSpec, rhs: np.ndarray) -> np.ndarray:
    """Zero-mean solution of the cell-centred 5-point Neumann problem."""
    eig = _dct_eigenvalues(grid)
    spec = scipy.fft.dctn(rhs, type=2, norm="ortho")
    with np.errstate(divide="ignore", invalid="ignore"):
        spec = np.where(eig != 0.0, spec / eig, 0.0)
    spec.flat[0] = 0.0
    return scipy.fft.idctn(spec, type=2, norm="ortho")


# ---------------------------------------------------------------------------
# node-centred Poisson with inhomogeneous Neumann data

class NodeNeumannPoisson:
    """Ghost-eliminated node Laplacian; one factorisation per grid."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        shape = grid.shape("node")
        size = int(np.prod(shape))
        eye = [scipy.sparse.identity(m, format="csr") for m in shape]
        ops = []
        for axis, (m, h) in enumerate(zip(shape, grid.spacing)):
            main = np.full(m, -2.0)
            off = np.ones(m - 1)
            a = scipy.sparse.diags([off, main, off], [-1, 0, 1], format="lil")
            a[0, 1] = 2.0
            a[-1, -2] = 2.0
            a = (a / (h * h)).tocsr()
            term = None
            for other in range(grid.dims):
                block = a if other == axis else eye[other]
                term = block if term is None else scipy.sparse.kron(term, block, format="csr")
            ops.append(term)
        lap = sum(ops[1:], ops[0]).tolil()
        lap[0, :] = 0.0
        lap[0, 0] = 1.0  # pin one node; the gauge is restored after the solve
        self._lu = scipy.sparse.linalg.splu(lap.tocsc())
        self._shape = shape
        w = np.ones(())
        for axis, (m, h) in enumerate(zip(shape, grid.spacing)):
            wa = np.full(m, h)
            wa[0] = wa[-1] = 0.5 * h
            sh = [1] * grid.dims
            sh[axis] = m
            w = w * wa.reshape(sh)
        self._weights = w

    def solve(self, rhs: np.ndarray, normal_data) -> np.ndarray:
        """Solve lap p = rhs with outward normal derivative given per face.

        ``normal_data[(axis, side)]`` holds grad p . n on that wall, sampled
        at the wall nodes.  The weighted mean of the assembled source is
        removed first (discrete compatibility), so the result is exact for
        compatible data and least-disturbed otherwise.
        """
        b = np.array(rhs, dtype=float)
        for (axis, side), g in normal_data.items():
            h = self.grid.spacing[axis]
            idx = [slice(None)] * self.grid.dims
            idx[axis] = 0 if side == 0 else -1
            b[tuple(idx)] -= 2.0 * np.asarray(g) / h
        b = b - float(np.sum(b * self._weights) / np.sum(self._weights))
        flat = b.reshape(-1).copy()
        flat[0] = 0.0
        p = self._lu.solve(flat).reshape(self._shape)
        p = p - float(np.sum(p * self._weights) / np.sum(self._weights))
        return p


def node_poisson(grid: GridSpec) -> NodeNeumannPoisson:
    key = (grid.cells, grid.lengths)
    solver = _NODE_SOLVERS.get(key)
    if solver is None:
        solver = NodeNeumannPoisson(grid)
        _NODE_SOLVERS[key] = solver
    return solver


# ---------------------------------------------------------------------------
# boundary datum sampling helpers

def _face_mesh(grid: GridSpec, comp_axis: int, wall_axis: int, side: int):
    """Coordinate arrays of a face-comp_axis array restricted to one wall."""
    coords = []
    for axis in range(grid.dims):
        if axis == wall_axis:
            coords.append(np.asarray(0.0 if side == 0 else grid.lengths[axis]))
        else:
            loc = f"face{comp_axis}" if axis == comp_axis else "cell"
            coords.append(grid.axis_coords(axis, loc if axis == comp_axis else "cell"))
    grids = np.meshgrid(*coords, indexing="ij", sparse=True)
    return grids


def _datum_component(datum, grid, comp_axis, wall_axis, side, t) -> np.ndarray:
    mesh = _face_mesh(grid, comp_axis, wall_axis, side)
    vals = datum.profile(*mesh, t)[comp_axis]
    target_shape = tuple(
        grid.shape(f"face{comp_axis}")[a] for a in range(grid.dims) if a != wall_axis
    )
    return np.broadcast_to(np.squeeze(np.asarray(vals, dtype=float)), target_shape)


def apply_normal_datum(grid: GridSpec, arrays: list[np.ndarray], datum, t) -> None:
    """Pin wall-normal faces of a MAC state to the boundary datum (in place)."""
    for axis in range(grid.dims):
        vals0 = _datum_component(datum, grid, axis, axis, 0, t)
        vals1 = _datum_component(datum, grid, axis, axis, 1, t)
        if datum.tangential_only:
            worst = max(np.max(np.abs(vals0)), np.max(np.abs(vals1)))
            if worst > 1e-10:
                raise ConstraintError(
                    f"tangential datum has normal component {worst:.3e} on axis {axis}"
                )
        a = np.moveaxis(arrays[axis], axis, 0)
        a[0] = vals0
        a[-1] = vals1


def _ghost_padded(grid: GridSpec, arrays, datum, comp_axis: int, t) -> np.ndarray:
    """Component array padded with reflected ghost layers on tangential walls.

    Corner ghosts (ghost-of-ghost entries) are edge-extended; every stencil
    that could read them is cropped away before use.
    """
    vals = arrays[comp_axis]
    padded: list[int] = []
    for axis in range(grid.dims):
        if axis == comp_axis:
            continue
        lo = np.asarray(_datum_component(datum, grid, comp_axis, axis, 0, t))
        hi = np.asarray(_datum_component(datum, grid, comp_axis, axis, 1, t))
        if padded:
            reduced = [ax for ax in range(grid.dims) if ax != axis]
            widths = [(1, 1) if ax in padded else (0, 0) for ax in reduced]
            lo = np.pad(lo, widths, mode="edge")
            hi = np.pad(hi, widths, mode="edge")
        a = np.moveaxis(vals, axis, 0)
        ghost_lo = 2.0 * lo - a[0]
        ghost_hi = 2.0 * hi - a[-1]
        a = np.concatenate([ghost_lo[None], a, ghost_hi[None]], axis=0)
        vals = np.moveaxis(a, 0, axis)
        padded.append(axis)
    return vals


def _transverse_velocity(grid, arrays, comp_axis: int, other: int) -> np.ndarray:
    """Velocity component ``other`` averaged onto interior comp_axis faces."""
    cb = arrays[other]
    a = np.moveaxis(cb, comp_axis, 0)  # comp_axis is a cell axis of cb
    pair = 0.5 * (a[1:] + a[:-1])  # onto interior comp_axis faces
    pair = np.moveaxis(pair, 0, comp_axis)
    b = np.moveaxis(pair, other, 0)  # other is the face axis of cb
    avg = 0.5 * (b[1:] + b[:-1])  # onto cell centres along `other`
    return np.moveaxis(avg, 0, other)


def _crop_to_interior(arr: np.ndarray, dims: int, comp_axis: int, consumed: int) -> np.ndarray:
    """Strip remaining ghost layers and keep interior faces along comp_axis.

    ``arr`` came from a derivative along ``consumed`` of the ghost-padded
    component; all tangential axes except ``consumed`` still carry ghosts.
    """
    sl = [slice(None)] * dims
    for ax in range(dims):
        if ax != comp_axis and ax != consumed:
            sl[ax] = slice(1, -1)
    if comp_axis != consumed:
        sl[comp_axis] = slice(1, -1)
    return arr[tuple(sl)]


def mac_rhs(grid: GridSpec, arrays, datum, forcing, mu: float, t: float):
    """Advection + diffusion + forcing on interior faces of each component."""
    dims = grid.dims
    out = []
    for axis in range(dims):
        comp = arrays[axis]
        padded = _ghost_padded(grid, arrays, datum, axis, t)
        rhs = np.zeros_like(comp)
        own = [slice(None)] * dims
        own[axis] = slice(1, -1)
        own = tuple(own)

        lap = np.zeros_like(comp[own])
        adv = np.zeros_like(comp[own])
        for b in range(dims):
            h = grid.spacing[b]
            pb = np.moveaxis(padded, b, 0)
            second = np.moveaxis((pb[2:] - 2.0 * pb[1:-1] + pb[:-2]) / (h * h), 0, b)
            grad_b = np.moveaxis((pb[2:] - pb[:-2]) / (2.0 * h), 0, b)
            lap += _crop_to_interior(second, dims, axis, b)
            if b == axis:
                vel = comp[own]
            else:
                vel = _transverse_velocity(grid, arrays, axis, b)
            adv += vel * _crop_to_interior(grad_b, dims, axis, b)
        rhs[own] += mu * lap - adv

        if forcing is not None and not forcing.is_zero:
            fvals = forcing.evaluate_component(grid, axis, f"face{axis}", t)
            rhs[own] += fvals[own]
        out.append(rhs)
    return out


def mac_divergence(grid: GridSpec, arrays) -> np.ndarray:
    div = np.zeros(grid.cells)
    for axis in range(grid.dims):
        h = grid.spacing[axis]
        a = np.moveaxis(arrays[axis], axis, 0)
        div += np.moveaxis((a[1:] - a[:-1]) / h, 0, axis)
    return div


def mac_project(grid: GridSpec, arrays, dt: float):
    """Pressure projection; returns corrected arrays and the pseudo-pressure."""
    div = mac_divergence(grid, arrays)
    rhs = div / dt
    mean = float(np.mean(rhs))
    net_flux = mean * grid.volume * dt
    scale = max(1.0, max(float(np.max(np.abs(a))) for a in arrays))
    if abs(net_flux) > MAC_FLUX_TOL * scale:
        raise SolvabilityError(
            f"pressure problem unsolvable: net boundary flux {net_flux:.6e}"
        )
    rhs = rhs - mean
    phi = solve_poisson_cells_neumann(grid, rhs)
    corrected = []
    for axis in range(grid.dims):
        h = grid.spacing[axis]
        a = np.moveaxis(arrays[axis], axis, 0).copy()
        p = np.moveaxis(phi, axis, 0)
        a[1:-1] -= dt * (p[1:] - p[:-1]) / h
        corrected.append(np.moveaxis(a, 0, axis))
    return corrected, phi


def mac_step(grid: GridSpec, arrays, t: float, dt: float, mu: float,
             forcing, datum, integrator: str):
    """One projected momentum step; returns (new arrays, pressure cells)."""

    def stage_rhs(ts, state):
        state = [s.copy() for s in state]
        apply_normal_datum(grid, state, datum, ts)
        return mac_rhs(grid, state, datum, forcing, mu, ts)

    if integrator == "explicit_euler":
        k1 = stage_rhs(t, arrays)
        star = [a + dt * k for a, k in zip(arrays, k1)]
    elif integrator == "rk4":
        k1 = stage_rhs(t, arrays)
        y2 = [a + 0.5 * dt * k for a, k in zip(arrays, k1)]
        k2 = stage_rhs(t + 0.5 * dt, y2)
        y3 = [a + 0.5 * dt * k for a, k in zip(arrays, k2)]
        k3 = stage_rhs(t + 0.5 * dt, y3)
        y4 = [a + dt * k for a, k in zip(arrays, k3)]
        k4 = stage_rhs(t + dt, y4)
        star = [
            a + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            for a, a1, a2, a3, a4 in zip(arrays, k1, k2, k3, k4)
        ]
    else:
        raise ValueError(f"integrator {integrator!r} is not available on the staggered grid")

    apply_normal_datum(grid, star, datum, t + dt)
    return mac_project(grid, star, dt)


def mac_state_from_field(v: VectorField):
    if v.layout != STAGGERED:
        raise ConstraintError("the staggered stepper needs a staggered_mac field")
    return [np.array(c.values) for c in v.components]


def mac_field_from_state(grid: GridSpec, arrays) -> VectorField:
    comps = tuple(
        ScalarField(grid, arr, f"face{axis}") for axis, arr in enumerate(arrays)
    )
    return VectorField(grid, comps, STAGGERED)
