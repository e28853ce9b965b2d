"""Structured grids for the two supported domain kinds.

A grid covers either a periodic torus or a bounded box with uniform
spacing per axis.  Sample locations follow the domain kind:

* periodic_torus -- one value per cell, sampled at the cell origin
  ``x_i = i * h`` (the standard transform grid, no duplicated endpoint);
* bounded_box -- one value per node, ``x_i = i * h`` for ``i = 0..n``
  including both walls.

Cell-centred values (``x_i = (i + 1/2) h``) and face-centred values
(staggered velocity components) exist only on bounded boxes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FieldMismatchError

PERIODIC = "periodic_torus"
BOUNDED = "bounded_box"

MIN_CELLS = 8


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Discretisation of the flow domain.

    ``cells`` are per-axis cell counts, ``lengths`` the per-axis extents.
    Spacing is derived, ``h_i = L_i / n_i``.
    """

    dims: int
    cells: tuple[int, ...]
    lengths: tuple[float, ...]
    domain_kind: str

    def __post_init__(self):
        if self.dims not in (2, 3):
            raise ValueError(f"dims must be 2 or 3, got {self.dims}")
        if self.domain_kind not in (PERIODIC, BOUNDED):
            raise ValueError(f"unknown domain kind {self.domain_kind!r}")
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        object.__setattr__(self, "lengths", tuple(float(l) for l in self.lengths))
        if len(self.cells) != self.dims or len(self.lengths) != self.dims:
            raise ValueError("cells and lengths must have one entry per axis")
        for n in self.cells:
            if n < MIN_CELLS:
                raise ValueError(f"cell count {n} < {MIN_CELLS}")
            if self.domain_kind == PERIODIC and not _is_power_of_two(n):
                raise ValueError(f"periodic grids need power-of-two cells, got {n}")
        for l in self.lengths:
            if not (l > 0.0) or not np.isfinite(l):
                raise ValueError(f"length must be positive, got {l}")

    @classmethod
    def periodic(cls, n, length=2.0 * np.pi, dims=2) -> "GridSpec":
        return cls(dims, (n,) * dims, (float(length),) * dims, PERIODIC)

    @classmethod
    def box(cls, n, length=1.0, dims=2) -> "GridSpec":
        return cls(dims, (n,) * dims, (float(length),) * dims, BOUNDED)

    @property
    def periodic_domain(self) -> bool:
        return self.domain_kind == PERIODIC

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def default_location(self) -> str:
        return "cell" if self.periodic_domain else "node"

    def shape(self, location: str | None = None) -> tuple[int, ...]:
        """Array shape of a field stored at ``location``."""
        loc = self.default_location if location in (None, "auto") else location
        if loc == "cell":
            return self.cells
        if self.periodic_domain:
            raise FieldMismatchError(f"location {loc!r} undefined on a periodic torus")
        if loc == "node":
            return tuple(n + 1 for n in self.cells)
        if loc.startswith("face"):
            axis = int(loc[4:])
            if not 0 <= axis < self.dims:
                raise FieldMismatchError(f"bad face axis in location {loc!r}")
            return tuple(n + 1 if a == axis else n for a, n in enumerate(self.cells))
        raise FieldMismatchError(f"unknown field location {loc!r}")

    def axis_coords(self, axis: int, location: str | None = None) -> np.ndarray:
        loc = self.default_location if location in (None, "auto") else location
        h = self.spacing[axis]
        n = self.cells[axis]
        if self.periodic_domain:
            return np.arange(n) * h
        if loc == "node" or (loc.startswith("face") and int(loc[4:]) == axis):
            return np.arange(n + 1) * h
        return (np.arange(n) + 0.5) * h

    def meshes(self, location: str | None = None) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis."""
        axes = [self.axis_coords(a, location) for a in range(self.dims)]
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))

    def node_count(self, location: str | None = None) -> int:
        return int(np.prod(self.shape(location)))
