"""Uniform lattice geometry, ternary phase fields and cell sets.

Cells are addressed by integer index tuples; cell ``i`` occupies the
half-open box ``origin + h * [i, i + 1)`` on every axis and is represented
by its center. Continuum sets are rasterized by testing cell centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .sets import Nothing, Shape

IN = np.int8(1)
OUT = np.int8(0)
FREE = np.int8(-1)


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform lattice of ``prod(extent)`` cubic cells of side ``h``."""

    origin: tuple
    extent: tuple
    h: float

    def __post_init__(self):
        origin = tuple(float(v) for v in np.atleast_1d(self.origin))
        extent = tuple(int(v) for v in np.atleast_1d(self.extent))
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "h", float(self.h))
        if len(extent) not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {len(extent)}")
        if len(origin) != len(extent):
            raise GridError("origin and extent lengths differ")
        if min(extent) < 1:
            raise GridError(f"all extents must be >= 1, got {extent}")
        if not self.h > 0 or not math.isfinite(self.h):
            raise GridError(f"h must be positive, got {self.h}")
        if math.prod(extent) > np.iinfo(np.intp).max:
            raise GridError("cell count exceeds the index range")

    @classmethod
    def box(cls, lo, hi, h):
        """Grid covering ``[lo, hi]`` per axis with spacing ``h``.

        The box side must be an integer multiple of ``h`` (to 1e-9).
        """
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        cells = (hi - lo) / h
        n = np.rint(cells).astype(int)
        if np.any(np.abs(cells - n) > 1e-9 * np.maximum(1.0, cells)):
            raise GridError(f"box side {hi - lo} is not a multiple of h={h}")
        return cls(tuple(lo), tuple(n), h)

    @property
    def dim(self) -> int:
        return len(self.extent)

    @property
    def shape(self) -> tuple:
        return self.extent

    @property
    def n_cells(self) -> int:
        return math.prod(self.extent)

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.origin)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.origin) + self.h * np.array(self.extent)

    def axes(self) -> list:
        """Cell-center coordinates along each axis."""
        return [o + self.h * (np.arange(n) + 0.5) for o, n in zip(self.origin, self.extent)]

    def centers(self) -> np.ndarray:
        """Array of shape ``extent + (dim,)`` holding every cell center."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def center(self, index) -> np.ndarray:
        index = np.asarray(index, dtype=float)
        return self.lo + self.h * (index + 0.5)

    def locate(self, point) -> tuple:
        """Index of the cell whose half-open box contains ``point``."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = np.floor((point - self.lo) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.array(self.extent)):
            raise GridError(f"point {point} lies outside the grid box")
        return tuple(int(i) for i in idx)

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.origin, tuple(n * factor for n in self.extent), self.h / factor)

    def rasterize(self, shape: Shape) -> np.ndarray:
        """Boolean mask of cells whose centers lie in ``shape``."""
        return shape.contains(self.centers())


@dataclass(frozen=True, eq=False)
class CellSet:
    """Subset of the cells of a grid stored as a dense boolean mask."""

    grid: Grid
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise GridError(f"mask shape {mask.shape} does not match grid {self.grid.shape}")
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    def _check(self, other):
        if other.grid != self.grid:
            raise GridError("cell sets live on different grids")

    def __or__(self, other):
        self._check(other)
        return CellSet(self.grid, self.mask | other.mask)

    def __and__(self, other):
        self._check(other)
        return CellSet(self.grid, self.mask & other.mask)

    def __sub__(self, other):
        self._check(other)
        return CellSet(self.grid, self.mask & ~other.mask)

    def __invert__(self):
        return CellSet(self.grid, ~self.mask)

    def __eq__(self, other):
        return isinstance(other, CellSet) and other.grid == self.grid and np.array_equal(self.mask, other.mask)

    def __len__(self):
        return int(self.mask.sum())

    def complement(self) -> "CellSet":
        return ~self

    def indices(self) -> np.ndarray:
        """Integer cell indices of the members, shape ``(count, dim)``."""
        return np.argwhere(self.mask)

    def issubset(self, other) -> bool:
        self._check(other)
        return not np.any(self.mask & ~other.mask)


@dataclass(frozen=True, eq=False)
class PhaseField:
    """Ternary labelling of a grid together with the free region and exterior data.

    ``labels`` holds IN / OUT / FREE per cell. ``region`` marks the cells of
    the free region (the domain where the set may change); it persists after
    the field is resolved. ``exterior`` describes the set beyond the grid box
    and is used for analytic far-field terms.
    """

    grid: Grid
    labels: np.ndarray
    region: np.ndarray
    exterior: Shape = dc_field(default_factory=Nothing)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8).copy()
        region = np.asarray(self.region, dtype=bool).copy()
        if labels.shape != self.grid.shape or region.shape != self.grid.shape:
            raise GridError("label/region arrays do not match the grid shape")
        if not np.all(np.isin(labels, (IN, OUT, FREE))):
            raise GridError("labels must be IN, OUT or FREE")
        if np.any((labels == FREE) & ~region):
            raise GridError("FREE cells found outside the free region")
        if self.exterior.dim == 0 and isinstance(self.exterior, Nothing):
            object.__setattr__(self, "exterior", Nothing(self.grid.dim))
        if self.exterior.dim != self.grid.dim:
            raise GridError("exterior set dimension differs from the grid")
        labels.flags.writeable = False
        region.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "region", region)

    @classmethod
    def from_shape(
        cls,
        grid: Grid,
        shape: Shape,
        region: Optional[np.ndarray] = None,
        free: bool = True,
    ) -> "PhaseField":
        """Rasterize ``shape``; cells of ``region`` become FREE when ``free``."""
        inside = grid.rasterize(shape)
        labels = np.where(inside, IN, OUT).astype(np.int8)
        if region is None:
            region = np.zeros(grid.shape, dtype=bool)
        region = np.asarray(region, dtype=bool)
        if free:
            labels[region] = FREE
        return cls(grid, labels, region, shape)

    @property
    def resolved(self) -> bool:
        return not np.any(self.labels == FREE)

    @property
    def inside(self) -> np.ndarray:
        return self.labels == IN

    @property
    def free_region(self) -> CellSet:
        return CellSet(self.grid, self.region)

    @property
    def free_cells(self) -> CellSet:
        return CellSet(self.grid, self.labels == FREE)

    def as_set(self) -> CellSet:
        return CellSet(self.grid, self.inside)

    def signed(self) -> np.ndarray:
        """``chi_E - chi_CE`` on the grid (requires a resolved field)."""
        self.require_resolved()
        return np.where(self.inside, 1.0, -1.0)

    def require_resolved(self):
        if not self.resolved:
            raise GridError(f"field has {int(np.sum(self.labels == FREE))} unresolved FREE cells")

    def with_inside(self, inside: np.ndarray) -> "PhaseField":
        """Resolved copy whose free-region labels follow ``inside``.

        Cells outside the free region keep their fixed labels.
        """
        inside = np.asarray(inside, dtype=bool)
        labels = self.labels.copy()
        labels[self.region] = np.where(inside[self.region], IN, OUT)
        return PhaseField(self.grid, labels, self.region, self.exterior)

    def unresolved(self) -> "PhaseField":
        """Copy with every free-region cell reset to FREE."""
        labels = self.labels.copy()
        labels[self.region] = FREE
        return PhaseField(self.grid, labels, self.region, self.exterior)

    def complement(self) -> "PhaseField":
        labels = self.labels.copy()
        labels[self.labels == IN] = OUT
        labels[self.labels == OUT] = IN
        return PhaseField(self.grid, labels, self.region, self.exterior.complement())


def cells_in_ball(grid: Grid, center: Sequence[float], r: float) -> CellSet:
    """Cells whose centers lie within distance ``r`` (inclusive) of ``center``."""
    if not r > 0:
        raise GridError(f"radius must be positive, got {r}")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    d2 = np.zeros(grid.shape)
    for k, ax in enumerate(grid.axes()):
        shp = [1] * grid.dim
        shp[k] = -1
        d2 = d2 + ((ax - center[k]) ** 2).reshape(shp)
    return CellSet(grid, d2 <= r * r)


def measure(cells: CellSet) -> float:
    """Lebesgue measure of the union of member cells."""
    return len(cells) * cells.grid.cell_volume


def face_neighbors_differ(mask: np.ndarray) -> np.ndarray:
    """Cells having at least one face neighbour (inside the array) with another value."""
    out = np.zeros(mask.shape, dtype=bool)
    for axis in range(mask.ndim):
        diff = np.diff(mask.astype(np.int8), axis=axis) != 0
        lo = [slice(None)] * mask.ndim
        hi = [slice(None)] * mask.ndim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        out[tuple(lo)] |= diff
        out[tuple(hi)] |= diff
    return out


def boundary_cells(field: PhaseField) -> CellSet:
    """IN cells with a face-adjacent OUT cell, together with OUT cells adjacent to IN."""
    field.require_resolved()
    return CellSet(field.grid, face_neighbors_differ(field.inside))
