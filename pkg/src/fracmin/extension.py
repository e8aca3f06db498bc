"""Weighted harmonic extension of a phase field and the monotone functional Phi.

The extension of ``u = chi_E - chi_CE`` to the upper half-space is the
convolution with the Poisson-type kernel

    P(x, z) ~ z^s / (|x|^2 + z^2)^((n+s)/2),

normalized to unit mass. It solves ``div(z^a grad U) = 0`` with ``a = 1 - s``.
The functional

    Phi(r) = int_{B_r^+} z^a |grad U|^2 dx dz / r^(n+a-1)

is evaluated on a geometric ladder of z-levels. Multiplicative constants of
the kernel are fixed by the unit-mass normalization and cancel in every
comparison made here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.interpolate import RegularGridInterpolator

from .grid import Grid, GridError, PhaseField
from .kernel import FractionalOrder, build_table, poisson_profile, poisson_upper_tail
from .mincut import assemble, certify_minimizer, solve_exact
from .sets import Cylinder, Raster1D, Shape, exterior_integral, wedge

LADDER_RATIO = 2.0 ** 0.2
_NEAR = 3
_CELL_POINTS = 6
_TAIL_DIRECTIONS = 256
_TAIL_SPACING = 8


class ExtensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ExtensionField:
    """Extension values ``values[k]`` at height ``z_levels[k]`` over the cells of ``grid``.

    Cells outside ``window`` carry NaN (their far-field terms were not evaluated).
    """

    grid: Grid
    z_levels: np.ndarray
    values: np.ndarray
    order: FractionalOrder
    trace: np.ndarray
    window: np.ndarray


def z_ladder(h: float, top: float, ratio: float = LADDER_RATIO) -> np.ndarray:
    """Levels ``h * ratio^j`` up to the first one at or above ``top``."""
    count = int(math.ceil(math.log(top / h) / math.log(ratio) - 1e-9)) + 1
    return h * ratio ** np.arange(max(count, 1))


def _level_samples(grid: Grid, z: float, s: float) -> np.ndarray:
    """Kernel samples over all box offsets, cell-averaged near the center."""
    n = grid.dim
    h = grid.h
    axes = [np.arange(-(e - 1), e) for e in grid.extent]
    d2 = sum(np.meshgrid(*[(a * h) ** 2 for a in axes], indexing="ij"))
    P = poisson_profile(d2, z, n, s)
    x, w = np.polynomial.legendre.leggauss(_CELL_POINTS)
    x, w = 0.5 * x, 0.5 * w
    near = [np.arange(-min(_NEAR, e - 1), min(_NEAR, e - 1) + 1) for e in grid.extent]
    for off in np.stack(np.meshgrid(*near, indexing="ij"), axis=-1).reshape(-1, n):
        pts = np.stack(np.meshgrid(*[(o + x) * h for o in off], indexing="ij"), axis=-1).reshape(-1, n)
        wt = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij"), axis=-1).reshape(-1, n), axis=1)
        P[tuple(off + np.array(grid.extent) - 1)] = float(poisson_profile((pts**2).sum(axis=1), z, n, s) @ wt)
    return P


def _exterior_terms(grid: Grid, shape: Shape, s: float, z: np.ndarray, window: np.ndarray):
    """Signed and total kernel mass beyond the box for every window cell and level."""
    n = grid.dim
    upper = poisson_upper_tail(n, s, z)
    idx = np.argwhere(window)
    lo_i, hi_i = idx.min(axis=0), idx.max(axis=0)
    coarse = []
    for a, b in zip(lo_i, hi_i):
        count = max(4, int(math.ceil((b - a) / _TAIL_SPACING)) + 1)
        coarse.append(np.linspace(a, b, min(count, b - a + 1)))
    pts_idx = np.stack(np.meshgrid(*coarse, indexing="ij"), axis=-1).reshape(-1, n)
    pts = grid.lo + grid.h * (pts_idx + 0.5)
    ins, tot, _, _ = exterior_integral(pts, grid.lo, grid.hi, shape, upper, _TAIL_DIRECTIONS)
    signed = (2.0 * ins - tot).reshape([len(c) for c in coarse] + [len(z)])
    total = tot.reshape([len(c) for c in coarse] + [len(z)])
    out_s = np.full((len(z),) + grid.shape, np.nan)
    out_t = np.full((len(z),) + grid.shape, np.nan)
    if all(len(c) >= 4 for c in coarse):
        method = "cubic"
    else:
        method = "linear"
    if all(len(c) >= 2 for c in coarse):
        fs = RegularGridInterpolator(coarse, signed, method=method)
        ft = RegularGridInterpolator(coarse, total, method=method)
        vs, vt = fs(idx.astype(float)), ft(idx.astype(float))
    else:
        vs, vt = signed.reshape(-1, len(z)), total.reshape(-1, len(z))
    for k in range(len(z)):
        out_s[k][tuple(idx.T)] = vs[:, k]
        out_t[k][tuple(idx.T)] = vt[:, k]
    return out_s, out_t


def extend(
    field: PhaseField,
    z_levels: Sequence[float],
    order: FractionalOrder,
    window: np.ndarray | None = None,
) -> ExtensionField:
    """Extension of the field's phase indicator at the given heights.

    Per level the value is the kernel-weighted average of ``u`` over the box
    plus the far-field mass of the exterior set, divided by the total mass,
    so ``|U| <= 1`` holds exactly.
    """
    field.require_resolved()
    grid = field.grid
    z = np.asarray(z_levels, dtype=float)
    if z.ndim != 1 or len(z) == 0 or np.any(np.diff(z) <= 0) or z[0] <= 0:
        raise ExtensionError("z levels must be positive and strictly increasing")
    if z[0] < grid.h / 2 * (1 - 1e-12):
        raise ExtensionError(f"smallest level {z[0]} is below h/2 = {grid.h / 2}")
    if window is None:
        window = np.ones(grid.shape, dtype=bool)
    s = order.s
    u = field.signed()
    hn = grid.cell_volume
    fshape = tuple(sfft.next_fast_len(2 * e - 1, real=True) for e in grid.extent)
    crop = tuple(slice(e - 1, 2 * e - 1) for e in grid.extent)
    uf = sfft.rfftn(u, fshape)
    of = sfft.rfftn(np.ones(grid.shape), fshape)
    ext_s, ext_t = _exterior_terms(grid, field.exterior, s, z, window)
    values = np.empty((len(z),) + grid.shape)
    for k, zk in enumerate(z):
        pf = sfft.rfftn(_level_samples(grid, zk, s), fshape)
        num = sfft.irfftn(uf * pf, fshape)[crop] * hn
        den = sfft.irfftn(of * pf, fshape)[crop] * hn
        val = (num + ext_s[k]) / (den + ext_t[k])
        values[k] = np.clip(val, -1.0, 1.0)
    values[:, ~window] = np.nan
    values.flags.writeable = False
    return ExtensionField(grid, z, values, order, u, window)


def weighted_energy(
    ext: ExtensionField,
    region: Callable[[np.ndarray, np.ndarray], np.ndarray],
    bottom_correction: bool = True,
) -> float:
    """``int z^a |grad U|^2`` over the slabs whose midpoints satisfy ``region(x, z)``.

    Slabs lie between consecutive levels, the lowest one between the trace
    ``z = 0`` and the first level. Vertical derivatives are differences
    between levels; horizontal derivatives are centered differences averaged
    over the two levels (the upper level alone in the lowest slab). The
    weight ``z^a`` is taken at slab midpoints. Away from the interface the
    extension deviates from the trace like ``z^s``, which a linear
    difference underestimates in the lowest slab by the factor ``s 2^a``;
    that factor is restored when ``bottom_correction`` is set.
    """
    grid = ext.grid
    a = ext.order.a
    s = ext.order.s
    h = grid.h
    levels = np.concatenate([[0.0], ext.z_levels])
    vals = np.concatenate([ext.trace[None], ext.values], axis=0)
    centers = grid.centers()
    total = []

    def grad_x(v):
        gs = []
        for axis in range(grid.dim):
            g = np.full(v.shape, np.nan)
            lo = [slice(None)] * grid.dim
            hi = [slice(None)] * grid.dim
            mid = [slice(None)] * grid.dim
            lo[axis], hi[axis], mid[axis] = slice(0, -2), slice(2, None), slice(1, -1)
            g[tuple(mid)] = (v[tuple(hi)] - v[tuple(lo)]) / (2 * h)
            gs.append(g)
        return sum(g * g for g in gs)

    gx = [None] * len(levels)
    for k in range(len(levels) - 1):
        z0, z1 = levels[k], levels[k + 1]
        zm = 0.5 * (z0 + z1)
        sel = region(centers, np.full(grid.shape, zm))
        if not sel.any():
            continue
        dz = z1 - z0
        gz = ((vals[k + 1] - vals[k]) / dz) ** 2
        if k == 0 and bottom_correction:
            gz = gz * s * 2.0**a
        if gx[k + 1] is None:
            gx[k + 1] = grad_x(vals[k + 1])
        if k == 0:
            gxx = gx[1]
        else:
            if gx[k] is None:
                gx[k] = grad_x(vals[k])
            gxx = 0.5 * (gx[k] + gx[k + 1])
        dens = (gz + gxx)[sel]
        if np.any(~np.isfinite(dens)):
            raise ExtensionError("region reaches cells outside the extension window")
        total.append(math.fsum(dens) * grid.cell_volume * dz * zm**a)
    return math.fsum(total)


def half_ball(center, r: float):
    """Predicate for ``{|(x - center, z)| < r}`` in the upper half-space."""
    center = np.asarray(center, dtype=float)

    def inside(x, z):
        d2 = ((x - center) ** 2).sum(axis=-1) + z**2
        return d2 < r * r

    return inside


@dataclass
class PhiCurve:
    """``Phi`` per radius with a two-resolution error estimate."""

    radii: np.ndarray
    values: np.ndarray
    discretization_error: np.ndarray
    coarse: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    fine: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "phi", "err"])
            for r, v, e in zip(self.radii, self.values, self.discretization_error):
                w.writerow([f"{r:.17g}", f"{v:.17g}", f"{e:.17g}"])


def richardson_order(order: FractionalOrder) -> float:
    """Assumed convergence order of Phi in h: the smaller of ``s`` and ``1 - s``."""
    return min(order.s, 1.0 - order.s)


def prolong(field: PhaseField, factor: int = 2) -> PhaseField:
    """Same set on the grid refined by ``factor``: each cell becomes ``factor^n`` children."""
    labels = field.labels
    region = field.region
    for axis in range(field.grid.dim):
        labels = np.repeat(labels, factor, axis=axis)
        region = np.repeat(region, factor, axis=axis)
    return PhaseField(field.grid.refine(factor), labels, region, field.exterior)


def phi_single(
    field: PhaseField,
    radii: Sequence[float],
    order: FractionalOrder,
    center=None,
) -> np.ndarray:
    """Phi at one resolution, all radii sharing one extension field."""
    grid = field.grid
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ExtensionError("radii must be positive and increasing")
    if center is None:
        center = np.zeros(grid.dim)
    center = np.asarray(center, dtype=float)
    rmax = float(radii[-1])
    margin = 2 * grid.h
    if np.any(center - rmax - margin < grid.lo) or np.any(center + rmax + margin > grid.hi):
        raise ExtensionError(f"radius {rmax} around {center.tolist()} leaves the safe region of the box")
    window = np.all(np.abs(grid.centers() - center) <= rmax + margin, axis=-1)
    ext = extend(field, z_ladder(grid.h, 2 * rmax), order, window)
    n, a = grid.dim, order.a
    return np.array([weighted_energy(ext, half_ball(center, r)) / r ** (n + a - 1) for r in radii])


def phi(
    field: PhaseField,
    radii: Sequence[float],
    order: FractionalOrder,
    center=None,
    fine: PhaseField | None = None,
) -> PhiCurve:
    """Phi over ``radii`` from the field and its refinement, Richardson-extrapolated.

    ``fine`` overrides the refined field (e.g. a set rasterized at ``h/2``);
    by default every cell is split into ``2^n`` children.
    """
    if fine is None:
        fine = prolong(field)
    pc = phi_single(field, radii, order, center)
    pf = phi_single(fine, radii, order, center)
    q = 2.0 ** richardson_order(order) - 1.0
    diff = (pf - pc) / q
    return PhiCurve(np.asarray(radii, dtype=float), pf + diff, np.abs(diff), pc, pf)


def cone_field(opening: float, h: float, half_width: float = 1.0) -> PhaseField:
    """Planar cone (sector about ``-e_2``) rasterized on ``[-L, L]^2``, exterior included."""
    grid = Grid.box([-half_width] * 2, [half_width] * 2, h)
    shape = wedge(opening)
    return PhaseField.from_shape(grid, shape, np.zeros(grid.shape, dtype=bool), free=False)


class ConeConstancyError(ExtensionError):
    pass


def cone_curve(opening: float, order: FractionalOrder, radii, h: float, half_width: float = 1.0) -> PhiCurve:
    """Phi of a planar cone from rasterizations at ``h`` and ``h/2``."""
    coarse = cone_field(opening, h, half_width)
    fine = cone_field(opening, h / 2, half_width)
    return phi(coarse, radii, order, fine=fine)


def cone_energy(
    opening: float,
    order: FractionalOrder,
    r_eval: float,
    h: float = 1 / 64,
    half_width: float = 1.0,
    rtol: float = 0.03,
) -> float:
    """Phi of a cone at ``r_eval``, after checking it agrees at ``r_eval/2`` within ``rtol``."""
    curve = cone_curve(opening, order, [r_eval / 2, r_eval], h, half_width)
    lo, hi = curve.values
    if abs(hi - lo) > rtol * abs(hi) + curve.discretization_error.sum():
        raise ConeConstancyError(
            f"Phi differs between r={r_eval / 2} and r={r_eval}: {lo} vs {hi}; refine the grid"
        )
    return float(hi)


@dataclass
class ProductReport:
    match: bool
    mismatched_cells: int
    certified_1d: bool
    certified_2d: bool
    field2d: PhaseField


def product_consistency(
    field1d: PhaseField,
    order: FractionalOrder,
    half_height: float = 0.5,
) -> ProductReport:
    """Solve the planar problem with data ``E x R`` and compare with the cylinder.

    The planar free region is the 1D free region times the full box height;
    the set beyond the box is the cylinder over the 1D field (completed by its
    own exterior beyond the 1D box).
    """
    field1d.require_resolved()
    g1 = field1d.grid
    if g1.dim != 1:
        raise GridError("product_consistency expects a 1D field")
    K1 = build_table(g1, order)
    ok1, _ = certify_minimizer(field1d, K1)
    base = Raster1D(g1.origin[0], g1.h, field1d.inside, field1d.exterior)
    shape = Cylinder(base, 2)
    ny = int(round(2 * half_height / g1.h))
    g2 = Grid((g1.origin[0], -half_height), (g1.extent[0], ny), g1.h)
    region = np.repeat(field1d.region[:, None], ny, axis=1)
    data = PhaseField.from_shape(g2, shape, region)
    K2 = build_table(g2, order)
    sol = solve_exact(assemble(data, K2))
    expect = np.repeat(field1d.inside[:, None], ny, axis=1)
    mism = int((sol.inside != expect).sum())
    ok2, _ = certify_minimizer(sol, K2)
    return ProductReport(mism == 0, mism, bool(ok1), bool(ok2), sol)
