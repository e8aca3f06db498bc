"""Pairwise cell interaction weights for the Riesz kernel |x - y|^-(n+s).

The weight of a lattice offset ``D`` is the exact double integral of the
kernel over two unit cells ``D`` apart, scaled to the grid spacing:

    w(D) = h^(n-s) * int_{[-1,1]^n} prod(1 - |t_i|) |D + t|^-(n+s) dt.

The tent weight ``prod(1 - |t_i|)`` is the overlap volume of two unit cells
shifted by ``t``. The integrand is smooth on each orthant of ``t`` except at
the point ``t = -D`` for face/edge/corner neighbours, where it is handled by
summing over dyadic shells in closed form.
"""

from __future__ import annotations

import functools
import hashlib
import itertools
import math
import struct
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import fft as sfft
from scipy import special

from .grid import Grid

NEAR_FIELD_RADIUS = 4
QUAD_TOL = 1e-11
_MAX_ORDER = 64
_MAX_DEPTH = 4
SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class FractionalOrder:
    """Fractional order ``s`` with ``sigma = s/2`` and extension weight ``a = 1 - s``."""

    s: float

    def __post_init__(self):
        s = float(self.s)
        if not 0.0 < s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {s}")
        object.__setattr__(self, "s", s)

    @property
    def sigma(self) -> float:
        return self.s / 2.0

    @property
    def a(self) -> float:
        return 1.0 - self.s


@functools.lru_cache(maxsize=None)
def _gl(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _tensor_nodes(lo, hi, order):
    """Gauss-Legendre nodes and weights on the box ``[lo, hi]``."""
    x, w = _gl(order)
    axes = [l + (u - l) * x for l, u in zip(lo, hi)]
    ws = [(u - l) * w for l, u in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    wt = functools.reduce(np.multiply.outer, ws).reshape(-1)
    return pts, wt


def _adaptive_box(f, lo, hi, depth=0):
    """Integrate ``f`` over a box, raising the order and then bisecting until converged."""
    prev = None
    order = 12
    while order <= _MAX_ORDER:
        pts, wt = _tensor_nodes(lo, hi, order)
        val = float(np.dot(f(pts), wt))
        if prev is not None and abs(val - prev) <= QUAD_TOL * abs(val):
            return val
        prev = val
        order += 8
    if depth >= _MAX_DEPTH:
        raise QuadratureError(f"cell-pair quadrature failed to converge on box {lo}..{hi}")
    mids = [(l + u) / 2 for l, u in zip(lo, hi)]
    total = 0.0
    for pick in itertools.product((0, 1), repeat=len(lo)):
        sub_lo = [m if p else l for l, m, p in zip(lo, mids, pick)]
        sub_hi = [u if p else m for u, m, p in zip(hi, mids, pick)]
        total += _adaptive_box(f, sub_lo, sub_hi, depth + 1)
    return total


def _singular_orthant(n_zero: int, n_match: int, s: float) -> float:
    """Integral of ``prod_Z(1-u) prod_M u * |u|^-(n+s)`` over the unit cube.

    ``Z`` axes carry tent factor ``1 - u_i``; ``M`` axes carry ``u_i``. The
    product expands into monomials; each monomial is homogeneous, so its cube
    integral equals the shell integral over ``[0,1]^n minus [0,1/2]^n``
    divided by ``1 - 2^-(deg - s)``.
    """
    n = n_zero + n_match
    total = 0.0
    for extra in itertools.product((0, 1), repeat=n_zero):
        pick = np.array(list(extra) + [1] * n_match, dtype=bool)
        coeff = (-1.0) ** sum(extra)
        deg = int(pick.sum())

        def f(u, pick=pick):
            r = np.sqrt(np.einsum("ij,ij->i", u, u))
            return np.prod(np.where(pick, u, 1.0), axis=1) * r ** (-(n + s))

        shell = 0.0
        for side in itertools.product((0, 1), repeat=n):
            if not any(side):
                continue
            lo = [0.5 if b else 0.0 for b in side]
            hi = [1.0 if b else 0.5 for b in side]
            shell += _adaptive_box(f, lo, hi)
        total += coeff * shell / (1.0 - 2.0 ** (-(deg - s)))
    return total


def cell_pair_integral(delta, s: float) -> float:
    """Exact interaction of two unit cells at integer offset ``delta`` (``delta != 0``)."""
    delta = np.abs(np.asarray(delta, dtype=np.int64))
    n = len(delta)
    if not np.any(delta):
        raise ValueError("offset 0 has a divergent self-interaction")
    total = 0.0
    for signs in itertools.product((1, -1), repeat=n):
        signs = np.array(signs)
        # along axis i the integrand distance is |delta_i + sign_i * u_i|
        singular = np.all((delta == 0) | ((delta == 1) & (signs == -1)))
        if singular:
            n_zero = int(np.sum(delta == 0))
            total += _singular_orthant(n_zero, n - n_zero, s)
            continue

        def f(u, signs=signs):
            d = delta + signs * u
            r = np.sqrt(np.einsum("ij,ij->i", d, d))
            return np.prod(1.0 - u, axis=1) * r ** (-(n + s))

        total += _adaptive_box(f, [0.0] * n, [1.0] * n)
    return total


def _far_weights(deltas: np.ndarray, s: float, order: int = 6) -> np.ndarray:
    """Vectorized cell-pair integrals for offsets with sup-norm above the near-field radius."""
    m, n = deltas.shape
    x, w = _gl(order)
    pts, wt = _tensor_nodes([0.0] * n, [1.0] * n, order)
    tent = np.prod(1.0 - pts, axis=1) * wt
    out = np.zeros(m)
    step = max(1, 2_000_000 // (len(pts) * n))
    for signs in itertools.product((1.0, -1.0), repeat=n):
        shift = pts * np.array(signs)
        for a in range(0, m, step):
            d = deltas[a : a + step, None, :] + shift[None, :, :]
            r2 = np.einsum("mpi,mpi->mp", d, d)
            out[a : a + step] += (r2 ** (-(n + s) / 2.0)) @ tent
    return out


@functools.lru_cache(maxsize=None)
def _unit_weights(extent: tuple, s: float) -> np.ndarray:
    """Unit-spacing weight array of shape ``(2N_k - 1)`` indexed by ``offset + N_k - 1``."""
    n = len(extent)
    axes = [np.arange(-(e - 1), e) for e in extent]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    canon = np.sort(np.abs(mesh), axis=1)
    uniq, inverse = np.unique(canon, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    vals = np.zeros(len(uniq))
    sup = uniq.max(axis=1)
    near = (sup > 0) & (sup <= NEAR_FIELD_RADIUS)
    for k in np.flatnonzero(near):
        vals[k] = _near_cached(tuple(int(v) for v in uniq[k]), s)
    far = sup > NEAR_FIELD_RADIUS
    if np.any(far):
        vals[far] = _far_weights(uniq[far].astype(float), s)
    table = vals[inverse].reshape([2 * e - 1 for e in extent])
    table.flags.writeable = False
    return table


@functools.lru_cache(maxsize=None)
def _near_cached(delta: tuple, s: float) -> float:
    return cell_pair_integral(delta, s)


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Interaction weights for every offset realizable inside a grid.

    ``weights[D + N - 1]`` holds ``w(D)`` for offset ``D`` (cells); ``w(0) = 0``.
    ``tail_exponent_coeff`` is the constant ``C`` in the exterior integral
    ``C * R^-s`` of the kernel beyond radius ``R`` from a point.
    """

    grid: Grid
    order: FractionalOrder
    weights: np.ndarray
    near_field_radius: int = NEAR_FIELD_RADIUS
    _cache: dict = dc_field(default_factory=dict, repr=False)

    @property
    def tail_exponent_coeff(self) -> float:
        return SPHERE_AREA[self.grid.dim] / self.order.s

    @property
    def s(self) -> float:
        return self.order.s

    def weight(self, delta) -> float:
        delta = np.atleast_1d(np.asarray(delta, dtype=np.int64))
        idx = tuple(delta + np.array(self.grid.extent) - 1)
        return float(self.weights[idx])

    def fft_plan(self):
        """Cached real FFT of the weight array for linear convolution over the box."""
        if "fft" not in self._cache:
            shape = tuple(sfft.next_fast_len(2 * e - 1, real=True) for e in self.grid.extent)
            self._cache["fft"] = (shape, sfft.rfftn(self.weights, shape))
        return self._cache["fft"]

    def convolve(self, values: np.ndarray) -> np.ndarray:
        """``(W * values)(i) = sum_j w(i - j) values(j)`` over the box, no wraparound."""
        shape, kf = self.fft_plan()
        vf = sfft.rfftn(np.asarray(values, dtype=float), shape)
        full = sfft.irfftn(vf * kf, shape)
        sl = tuple(slice(e - 1, 2 * e - 1) for e in self.grid.extent)
        return full[sl]

    def row_sum(self) -> float:
        """Sum of all weights, i.e. the largest total interaction of one cell."""
        return math.fsum(self.weights.ravel())


def build_table(grid: Grid, order: FractionalOrder) -> KernelTable:
    """Weights for all offsets of ``grid`` at fractional order ``order``."""
    unit = _unit_weights(tuple(grid.extent), order.s)
    weights = unit * grid.h ** (grid.dim - order.s)
    weights.flags.writeable = False
    return KernelTable(grid, order, weights)


def tail_integral(grid: Grid, order: FractionalOrder, x, R: float) -> float:
    """``int_{|y - x| > R} |y - x|^-(n+s) dy``, exact: sphere area times ``R^-s / s``."""
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    return SPHERE_AREA[grid.dim] * R ** (-order.s) / order.s


def riesz_upper_tail(s: float):
    """Radial tail ``int_rho^inf t^-(1+s) dt = rho^-s / s`` with a trailing unit axis."""

    def upper(rho):
        with np.errstate(divide="ignore"):
            return (np.asarray(rho, dtype=float) ** (-s) / s)[..., None]

    return upper


def poisson_profile(r2, z, dim: int, s: float):
    """Unnormalized ``z^s / (|x|^2 + z^2)^((n+s)/2)`` at squared distances ``r2``."""
    return z**s / (r2 + z * z) ** ((dim + s) / 2.0)


def poisson_upper_tail(dim: int, s: float, z):
    """Radial tail ``int_rho^inf poisson_profile(t^2, z) t^(n-1) dt``, one column per ``z``.

    In closed form this is ``B(n/2, s/2)/2`` times the complementary regularized
    incomplete beta function at ``rho^2 / (rho^2 + z^2)``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    half_b = 0.5 * special.beta(dim / 2.0, s / 2.0)

    def upper(rho):
        rho = np.asarray(rho, dtype=float)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(rho > 0, (z / rho) ** 2, np.inf)
        x = 1.0 / (1.0 + q)
        return half_b * special.betaincc(dim / 2.0, s / 2.0, x)

    return upper


_MAGIC = b"FRKT"
_VERSION = 1


def _header(table: KernelTable) -> bytes:
    g = table.grid
    return struct.pack(
        f"<4sII{g.dim}Idd", _MAGIC, _VERSION, g.dim, *g.extent, g.h, table.order.s
    )


def cache_key(table: KernelTable) -> str:
    return hashlib.sha256(_header(table)).hexdigest()


def save_table(table: KernelTable, path) -> str:
    """Write header, offsets and weights in little-endian layout; returns the cache key."""
    g = table.grid
    axes = [np.arange(-(e - 1), e) for e in g.extent]
    offsets = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g.dim)
    with open(path, "wb") as fh:
        head = _header(table)
        fh.write(head)
        fh.write(bytes.fromhex(cache_key(table)))
        fh.write(offsets.astype("<i4").tobytes())
        fh.write(table.weights.astype("<f8").ravel().tobytes())
    return cache_key(table)


def load_table(path, grid: Grid | None = None) -> KernelTable:
    """Read a table written by :func:`save_table`, verifying the header hash."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, version, dim = struct.unpack_from("<4sII", data, 0)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError("not a kernel table cache file")
    fmt = f"<4sII{dim}Idd"
    fields = struct.unpack_from(fmt, data, 0)
    extent = fields[3 : 3 + dim]
    h, s = fields[3 + dim], fields[4 + dim]
    pos = struct.calcsize(fmt)
    key = data[pos : pos + 32]
    if hashlib.sha256(data[:pos]).digest() != key:
        raise ValueError("kernel table cache header hash mismatch")
    pos += 32
    count = math.prod(2 * e - 1 for e in extent)
    pos += count * dim * 4
    weights = np.frombuffer(data, dtype="<f8", count=count, offset=pos).astype(float)
    weights = weights.reshape([2 * e - 1 for e in extent])
    weights.flags.writeable = False
    if grid is None:
        grid = Grid((0.0,) * dim, tuple(extent), h)
    elif tuple(grid.extent) != tuple(extent) or grid.h != h:
        raise ValueError("cached table does not match the requested grid")
    return KernelTable(grid, FractionalOrder(s), weights)
