"""Nonlocal mean curvature and empirical regularity checks on resolved fields.

The curvature of ``E`` at ``x`` is the principal value

    H(x) = PV int (chi_E - chi_CE)(y) |x - y|^-(n+s) dy.

On the grid it is evaluated at the cell containing ``x``: cells whose centers
lie within the excision radius ``delta`` of that cell's center are dropped,
the rest contribute their cell-averaged weights, and the part of the
exterior set beyond the box enters through tail integrals.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .grid import GridError, PhaseField, boundary_cells, cells_in_ball, face_neighbors_differ
from .kernel import KernelTable
from .sets import HalfSpace
from .tails import TailField, exterior_tails

_CALIBRATION_ANGLES = (0.0, math.atan(0.5), math.pi / 4)


@dataclass(frozen=True)
class CurvatureSample:
    point: np.ndarray
    value: float
    excision_radius: float
    pv_error_bound: float
    tail_error_bound: float
    on_boundary: bool = True


def _excised_fft(K: KernelTable, delta: float):
    key = ("excised", round(delta / K.grid.h, 9))
    if key not in K._cache:
        ext = np.array(K.grid.extent)
        axes = [np.arange(-(e - 1), e) * K.grid.h for e in ext]
        d2 = sum(np.meshgrid(*[a**2 for a in axes], indexing="ij"))
        w = np.where(d2 > delta**2 * (1 + 1e-9), K.weights, 0.0)
        shape = tuple(sfft.next_fast_len(2 * e - 1, real=True) for e in ext)
        K._cache[key] = (shape, sfft.rfftn(w, shape), w)
    return K._cache[key]


def _check_delta(K: KernelTable, delta):
    h = K.grid.h
    if delta is None:
        delta = 3.0 * h
    if delta < 2.0 * h * (1 - 1e-12):
        raise ValueError(f"excision radius {delta} is below 2h = {2 * h}")
    return float(delta)


def curvature_field(
    field: PhaseField,
    K: KernelTable,
    delta: float | None = None,
    mask: np.ndarray | None = None,
    tails: TailField | None = None,
):
    """Excised curvature at every cell of ``mask`` (NaN elsewhere) and the tail error."""
    field.require_resolved()
    delta = _check_delta(K, delta)
    grid = field.grid
    if mask is None:
        mask = np.ones(grid.shape, dtype=bool)
    shape, kf, _ = _excised_fft(K, delta)
    vf = sfft.rfftn(field.signed(), shape)
    full = sfft.irfftn(vf * kf, shape)
    conv = full[tuple(slice(e - 1, 2 * e - 1) for e in grid.extent)]
    if tails is None:
        tails = exterior_tails(grid, field.exterior, K.s, mask)
    value = conv / grid.cell_volume + tails.t_in - tails.t_out
    return np.where(mask, value, np.nan), np.where(mask, tails.err_in + tails.err_out, np.nan)


def calibrate_pv_constant(K: KernelTable, delta: float | None = None) -> float:
    """Constant ``C`` of the bound ``C * delta^(1-s)``, fitted on rasterized half-planes.

    Half-planes through the box center at several orientations have zero
    curvature in the continuum; the largest discrete value at their boundary
    cells (plus the tail error there) divided by ``delta^(1-s)`` gives ``C``.
    """
    delta = _check_delta(K, delta)
    key = ("pv_constant", round(delta / K.grid.h, 9))
    if key in K._cache:
        return K._cache[key]
    grid = K.grid
    center = 0.5 * (grid.lo + grid.hi)
    worst = 0.0
    for ang in _CALIBRATION_ANGLES:
        if grid.dim == 1:
            normal = np.array([1.0])
        else:
            normal = np.zeros(grid.dim)
            normal[-1], normal[0] = math.cos(ang), math.sin(ang)
        shape = HalfSpace(normal, float(normal @ center))
        f = PhaseField.from_shape(grid, shape, np.ones(grid.shape, dtype=bool), free=False)
        bmask = boundary_cells(f).mask
        vals, errs = curvature_field(f, K, delta, bmask)
        worst = max(worst, float(np.nanmax(np.abs(vals[bmask]) + errs[bmask])))
        if grid.dim == 1:
            break
    roundoff = 1e-10 * K.row_sum() / grid.cell_volume
    C = 1.05 * (worst + roundoff) / delta ** (1.0 - K.s)
    K._cache[key] = C
    return C


def nl_mean_curvature(
    field: PhaseField,
    x0,
    K: KernelTable,
    delta: float | None = None,
    tails: TailField | None = None,
    pv_constant: float | None = None,
) -> CurvatureSample:
    """Excised curvature of ``field`` at the cell containing ``x0``.

    A warning is issued when that cell is not a boundary cell; the value is
    still returned.
    """
    field.require_resolved()
    delta = _check_delta(K, delta)
    grid = field.grid
    idx = grid.locate(x0)
    mask = np.zeros(grid.shape, dtype=bool)
    mask[idx] = True
    _, _, w = _excised_fft(K, delta)
    ext = np.array(grid.extent)
    i = np.array(idx)
    sl = tuple(slice(e - 1 - k, 2 * e - 1 - k) for e, k in zip(ext, i))
    # w(j - idx) over all cells j
    wrow = w[sl]
    box = math.fsum((wrow * field.signed()).ravel()) / grid.cell_volume
    if tails is None:
        tails = exterior_tails(grid, field.exterior, K.s, mask)
    value = box + tails.t_in[idx] - tails.t_out[idx]
    on_b = bool(face_neighbors_differ(field.inside)[idx])
    if not on_b:
        warnings.warn(f"point {np.asarray(x0).tolist()} is not on the discrete boundary", stacklevel=2)
    C = calibrate_pv_constant(K, delta) if pv_constant is None else pv_constant
    return CurvatureSample(
        point=np.atleast_1d(np.asarray(x0, dtype=float)),
        value=value,
        excision_radius=delta,
        pv_error_bound=C * delta ** (1.0 - K.s),
        tail_error_bound=float(tails.err_in[idx] + tails.err_out[idx]),
        on_boundary=on_b,
    )


@dataclass
class ViscosityReport:
    checked: int
    violations: list
    max_value: float
    bound: float

    @property
    def ok(self) -> bool:
        return not self.violations


def tangent_ball_cells(field: PhaseField, radius_cells: float = 4.0) -> np.ndarray:
    """OUT cells that touch an IN face neighbour lying on an all-IN ball of the given radius.

    For an OUT cell ``j`` next to an IN cell along unit axis ``e``, the ball of
    radius ``R`` centered ``R + h/2`` behind ``j`` along ``-e`` must lie in the
    box and contain only IN cell centers.
    """
    field.require_resolved()
    grid = field.grid
    h = grid.h
    inside = field.inside
    R = radius_cells * h
    span = int(math.ceil(R / h)) + 1
    out = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        for sign in (1, -1):
            behind = np.roll(inside, sign, axis=axis)
            wrap = [slice(None)] * grid.dim
            wrap[axis] = slice(0, 1) if sign == 1 else slice(-1, None)
            behind[tuple(wrap)] = False
            for j in np.argwhere(~inside & behind):
                if out[tuple(j)]:
                    continue
                c = grid.center(j)
                c[axis] -= sign * (R + 0.5 * h)
                if np.any(c - R < grid.lo) or np.any(c + R > grid.hi):
                    continue
                base = np.floor((c - grid.lo) / h).astype(int)
                sl = tuple(
                    slice(max(b - span, 0), min(b + span + 1, e)) for b, e in zip(base, grid.extent)
                )
                axes = [grid.lo[k] + h * (np.arange(s.start, s.stop) + 0.5) for k, s in enumerate(sl)]
                d2 = sum(np.meshgrid(*[(a - ck) ** 2 for a, ck in zip(axes, c)], indexing="ij"))
                if np.all(inside[sl][d2 <= R * R]):
                    out[tuple(j)] = True
    return out


def viscosity_sign_check(
    field: PhaseField,
    K: KernelTable,
    delta: float | None = None,
    radius_cells: float = 4.0,
    tails: TailField | None = None,
    mask: np.ndarray | None = None,
) -> ViscosityReport:
    """Curvature at OUT boundary cells with an interior tangent ball must not exceed the PV bound.

    ``mask`` optionally restricts the cells examined (e.g. to the free region).
    """
    delta = _check_delta(K, delta)
    cells = tangent_ball_cells(field, radius_cells)
    if mask is not None:
        cells &= mask
    bound = calibrate_pv_constant(K, delta) * delta ** (1.0 - K.s)
    if not cells.any():
        return ViscosityReport(0, [], -math.inf, bound)
    vals, errs = curvature_field(field, K, delta, cells, tails)
    v = vals[cells]
    e = errs[cells]
    idx = np.argwhere(cells)
    violations = [
        (tuple(int(t) for t in i), float(val)) for i, val, er in zip(idx, v, e) if val > bound + er
    ]
    return ViscosityReport(int(cells.sum()), violations, float(v.max()), bound)


def density_profile(field: PhaseField, x, radii):
    """``|E & B_r(x)| / r^n`` for each radius; ``x`` is a point or a cell index tuple."""
    field.require_resolved()
    grid = field.grid
    x = np.asarray(x)
    point = grid.center(x) if np.issubdtype(x.dtype, np.integer) else x.astype(float)
    out = []
    for r in radii:
        if np.any(point - r < grid.lo - 1e-12) or np.any(point + r > grid.hi + 1e-12):
            raise GridError(f"ball of radius {r} at {point} leaves the grid box")
        ball = cells_in_ball(grid, point, r).mask
        vol = int((ball & field.inside).sum()) * grid.cell_volume
        out.append((float(r), vol / r**grid.dim))
    return out


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass
class CleanBallResult:
    found_in: bool
    found_out: bool
    c_realized: float
    c_in: float
    c_out: float
    flagged: bool

    def __iter__(self):
        return iter((self.found_in, self.found_out, self.c_realized))


def clean_ball_check(field: PhaseField, x, r: float, c_min: float | None = None) -> CleanBallResult:
    """Largest all-IN and all-OUT balls inside ``B_r(x)``, as fractions of ``r``.

    A ball ``B_rho(y)`` counts as clean when it contains no cell center of the
    opposite phase; it is found when ``rho >= 2h``. ``c_realized`` is the
    smaller ratio among the phases found (or among both when neither is).
    The result is flagged when either phase is missing or the ratio is below
    ``c_min`` (default ``4h / r``).
    """
    field.require_resolved()
    grid = field.grid
    h = grid.h
    x = np.asarray(x)
    point = grid.center(x) if np.issubdtype(x.dtype, np.integer) else x.astype(float)
    ball = cells_in_ball(grid, point, r).mask
    centers = grid.centers()
    gap = r - np.sqrt(((centers - point) ** 2).sum(axis=-1))

    def best(phase):
        if not phase.any():
            return 0.0
        other = ~phase
        d = ndimage.distance_transform_edt(phase, sampling=h) if other.any() else np.full(grid.shape, np.inf)
        rho = np.minimum(d, gap)
        sel = phase & ball
        return float(rho[sel].max()) if sel.any() else 0.0

    rho_in = best(field.inside)
    rho_out = best(~field.inside)
    c_in, c_out = rho_in / r, rho_out / r
    found_in, found_out = rho_in >= 2 * h, rho_out >= 2 * h
    found = [c for c, f in ((c_in, found_in), (c_out, found_out)) if f]
    c_real = min(found) if found else min(c_in, c_out)
    if c_min is None:
        c_min = 4 * h / r
    flagged = not (found_in and found_out) or c_real < c_min
    return CleanBallResult(found_in, found_out, c_real, c_in, c_out, flagged)


def write_samples_csv(samples, path):
    """CSV with columns ``x..., value, delta, pv_error, tail_error``."""
    samples = list(samples)
    dim = len(samples[0].point) if samples else 1
    names = ["x", "y", "z"][:dim] if dim > 1 else ["x"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["value", "delta", "pv_error", "tail_error"])
        for smp in samples:
            w.writerow(
                [f"{v:.17g}" for v in smp.point]
                + [f"{v:.17g}" for v in (smp.value, smp.excision_radius, smp.pv_error_bound, smp.tail_error_bound)]
            )
