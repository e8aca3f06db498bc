"""Analytically prescribed continuum sets and ray integration beyond a box.

Every shape answers two questions: point membership, and the candidate
distances at which a ray ``x + rho * d`` may cross its boundary. The second
is what lets far-field integrals be evaluated exactly in the radial variable:
between consecutive crossings a ray is either entirely inside or outside.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np


class Shape:
    """A measurable subset of R^dim given by a membership test."""

    dim: int = 0

    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def breaks(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Candidate crossing distances, shape ``(m, k, B)``; NaN marks no crossing.

        ``origins`` has shape ``(m, dim)`` and ``dirs`` shape ``(k, dim)``.
        Extra candidates are harmless; missing ones are not.
        """
        raise NotImplementedError

    def complement(self) -> "Shape":
        return Complement(self)


def _positive(rho):
    rho = np.asarray(rho, dtype=float)
    return np.where(rho > 0, rho, np.nan)


class Nothing(Shape):
    def __init__(self, dim: int = 0):
        self.dim = dim

    def contains(self, points):
        return np.zeros(np.shape(points)[:-1], dtype=bool)

    def breaks(self, origins, dirs):
        return np.full((len(origins), len(dirs), 1), np.nan)

    def complement(self):
        return Everything(self.dim)

    def __repr__(self):
        return f"Nothing(dim={self.dim})"


class Everything(Shape):
    def __init__(self, dim: int = 0):
        self.dim = dim

    def contains(self, points):
        return np.ones(np.shape(points)[:-1], dtype=bool)

    def breaks(self, origins, dirs):
        return np.full((len(origins), len(dirs), 1), np.nan)

    def complement(self):
        return Nothing(self.dim)

    def __repr__(self):
        return f"Everything(dim={self.dim})"


class Complement(Shape):
    def __init__(self, base: Shape):
        self.base = base
        self.dim = base.dim

    def contains(self, points):
        return ~self.base.contains(points)

    def breaks(self, origins, dirs):
        return self.base.breaks(origins, dirs)

    def complement(self):
        return self.base

    def __repr__(self):
        return f"Complement({self.base!r})"


class HalfSpace(Shape):
    """Closed half-space ``{x : x . normal <= offset}``."""

    def __init__(self, normal: Sequence[float], offset: float = 0.0):
        normal = np.asarray(normal, dtype=float)
        self.normal = normal / np.linalg.norm(normal)
        self.offset = float(offset)
        self.dim = len(normal)

    @classmethod
    def lower(cls, dim: int, offset: float = 0.0):
        """``{x_n <= offset}`` in ``dim`` dimensions."""
        normal = np.zeros(dim)
        normal[-1] = 1.0
        return cls(normal, offset)

    def contains(self, points):
        return np.asarray(points) @ self.normal <= self.offset + 1e-12 * max(1.0, abs(self.offset))

    def breaks(self, origins, dirs):
        num = self.offset - origins @ self.normal
        den = dirs @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = num[:, None] / den[None, :]
        return _positive(rho)[..., None]

    def __repr__(self):
        return f"HalfSpace(normal={self.normal.tolist()}, offset={self.offset})"


class Ball(Shape):
    """Closed ball of given center and radius."""

    def __init__(self, center: Sequence[float], radius: float):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = len(self.center)

    def contains(self, points):
        d = np.asarray(points) - self.center
        return np.einsum("...i,...i->...", d, d) <= self.radius**2 * (1 + 1e-12)

    def breaks(self, origins, dirs):
        p = origins - self.center
        a = np.einsum("ki,ki->k", dirs, dirs)[None, :]
        b = 2.0 * (p @ dirs.T)
        c = (np.einsum("mi,mi->m", p, p) - self.radius**2)[:, None]
        disc = b * b - 4 * a * c
        root = np.sqrt(np.where(disc >= 0, disc, np.nan))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = (-b - root) / (2 * a)
            r2 = (-b + root) / (2 * a)
        return np.stack([_positive(r1), _positive(r2)], axis=-1)

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class Sectors(Shape):
    """Union of planar sectors with apex at the origin.

    Each sector is ``(bisector_angle, opening)``; a point belongs to it when
    its polar angle lies in ``[bisector - opening/2, bisector + opening/2)``.
    The half-open convention makes the sector of opening ``2*pi - opening``
    about the opposite bisector the exact complement, even for points on the
    boundary rays. The apex is always included.
    """

    dim = 2

    def __init__(self, sectors: Sequence[tuple]):
        self.sectors = [(float(b), float(o)) for b, o in sectors]
        for _, o in self.sectors:
            if not 0 < o < 2 * math.pi:
                raise ValueError(f"sector opening must lie in (0, 2*pi), got {o}")

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        theta = np.arctan2(points[..., 1], points[..., 0])
        out = np.zeros(points.shape[:-1], dtype=bool)
        for bisector, opening in self.sectors:
            # angle past the start ray, shifted so that the start ray itself counts
            q = np.mod(theta - (bisector - opening / 2) + 1e-12, 2 * np.pi)
            out |= q < opening
        at_apex = np.all(points == 0.0, axis=-1)
        return out | at_apex

    def breaks(self, origins, dirs):
        rhos = []
        for bisector, opening in self.sectors:
            for ang in (bisector - opening / 2, bisector + opening / 2):
                e = np.array([math.cos(ang), math.sin(ang)])
                cx = e[0] * origins[:, 1] - e[1] * origins[:, 0]
                cd = e[0] * dirs[:, 1] - e[1] * dirs[:, 0]
                with np.errstate(divide="ignore", invalid="ignore"):
                    rhos.append(_positive(-cx[:, None] / cd[None, :]))
        return np.stack(rhos, axis=-1)

    def __repr__(self):
        return f"Sectors({self.sectors})"


def wedge(opening: float) -> Sectors:
    """Sector of the given opening bisected by ``-e_2``; ``wedge(pi)`` is ``{x_2 < 0}`` plus the negative ``x_1`` axis."""
    return Sectors([(-math.pi / 2, opening)])


class Intervals(Shape):
    """Finite union of closed intervals on the line (endpoints may be infinite)."""

    dim = 1

    def __init__(self, intervals: Sequence[tuple]):
        self.intervals = [(float(a), float(b)) for a, b in intervals]

    def contains(self, points):
        x = np.asarray(points, dtype=float)[..., 0]
        out = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (x >= a) & (x <= b)
        return out

    def breaks(self, origins, dirs):
        ends = [e for iv in self.intervals for e in iv if math.isfinite(e)]
        if not ends:
            return np.full((len(origins), len(dirs), 1), np.nan)
        ends = np.array(ends)
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = (ends[None, None, :] - origins[:, 0][:, None, None]) / dirs[:, 0][None, :, None]
        return _positive(rho)

    def __repr__(self):
        return f"Intervals({self.intervals})"


class Cylinder(Shape):
    """Product ``base x R^(dim - base.dim)``; the base lives on the leading axes."""

    def __init__(self, base: Shape, dim: int):
        if dim <= base.dim:
            raise ValueError("cylinder dimension must exceed the base dimension")
        self.base = base
        self.dim = dim

    def contains(self, points):
        return self.base.contains(np.asarray(points)[..., : self.base.dim])

    def breaks(self, origins, dirs):
        return self.base.breaks(origins[:, : self.base.dim], dirs[:, : self.base.dim])

    def __repr__(self):
        return f"Cylinder({self.base!r}, dim={self.dim})"


class Raster1D(Shape):
    """A 1D cell mask inside ``[lo, hi)`` completed by another shape outside it."""

    dim = 1

    def __init__(self, lo: float, h: float, mask: np.ndarray, outside: Shape):
        self.lo = float(lo)
        self.h = float(h)
        self.mask = np.asarray(mask, dtype=bool).copy()
        self.hi = self.lo + self.h * len(self.mask)
        self.outside = outside
        change = np.flatnonzero(np.diff(self.mask.astype(np.int8)) != 0) + 1
        self._faces = np.concatenate([[self.lo, self.hi], self.lo + self.h * change])

    def contains(self, points):
        x = np.asarray(points, dtype=float)[..., 0]
        idx = np.floor((x - self.lo) / self.h).astype(np.int64)
        inbox = (idx >= 0) & (idx < len(self.mask))
        res = self.outside.contains(points)
        res = np.where(inbox, self.mask[np.clip(idx, 0, len(self.mask) - 1)], res)
        return res

    def breaks(self, origins, dirs):
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = (self._faces[None, None, :] - origins[:, 0][:, None, None]) / dirs[:, 0][None, :, None]
        return np.concatenate([_positive(rho), self.outside.breaks(origins, dirs)], axis=-1)


def sphere_directions(dim: int, n: int = 512):
    """Quadrature directions and weights on the unit sphere S^(dim-1).

    Weights sum to the sphere area (2, 2*pi, 4*pi). In 2D the ``n`` angles
    are equally spaced; in 3D Gauss-Legendre in the polar cosine is paired
    with ``n`` equally spaced azimuths.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        theta = 2 * np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(theta), np.sin(theta)], axis=1), np.full(n, 2 * np.pi / n)
    if dim == 3:
        m = max(2, n // 2)
        x, w = np.polynomial.legendre.leggauss(m)
        phi = 2 * np.pi * (np.arange(n) + 0.5) / n
        ct, ph = np.meshgrid(x, phi, indexing="ij")
        st = np.sqrt(1 - ct**2)
        dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
        weights = (w[:, None] * np.full(n, 2 * np.pi / n)[None, :]).reshape(-1)
        return dirs, weights
    raise ValueError(f"unsupported dimension {dim}")


def box_exit(points: np.ndarray, lo, hi, dirs: np.ndarray) -> np.ndarray:
    """Distance along each direction at which a ray from ``points`` leaves the box.

    ``lo`` and ``hi`` are either shared corners or one row per point.
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float))[:, None, :]
    hi = np.atleast_2d(np.asarray(hi, dtype=float))[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = (hi - points[:, None, :]) / dirs[None, :, :]
        t_lo = (lo - points[:, None, :]) / dirs[None, :, :]
    t = np.where(dirs[None, :, :] > 0, t_hi, np.where(dirs[None, :, :] < 0, t_lo, np.inf))
    return t.min(axis=-1)


def ray_segments(points, lo, hi, shape: Shape, dirs):
    """Split every ray beyond the box into segments of constant membership.

    Returns ``(start, end, inside)`` of shape ``(m, k, S)``; ``end`` may be
    ``inf`` and zero-length segments carry no weight.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rho_b = box_exit(points, lo, hi, dirs)
    brk = shape.breaks(points, dirs)
    brk = np.where(np.isnan(brk) | (brk < rho_b[..., None]), rho_b[..., None], brk)
    brk = np.sort(brk, axis=-1)
    inf = np.full(rho_b.shape + (1,), np.inf)
    pts = np.concatenate([rho_b[..., None], brk, inf], axis=-1)
    start, end = pts[..., :-1], pts[..., 1:]
    mid = np.where(np.isfinite(end), 0.5 * (start + end), 2.0 * start + 1.0)
    probe = points[:, None, None, :] + mid[..., None] * dirs[None, :, None, :]
    inside = shape.contains(probe) & (end > start)
    return start, end, inside


def exterior_integral(
    points,
    lo,
    hi,
    shape: Shape,
    upper_tail: Callable[[np.ndarray], np.ndarray],
    n_dirs: int = 512,
    chunk: int = 2048,
):
    """Integrate a radial kernel over ``shape`` outside the box, seen from each point.

    The box ``[lo, hi]`` may be shared or given per point (rows of ``lo``/``hi``).

    ``upper_tail(rho)`` must return ``int_rho^inf k(t) t^(dim-1) dt`` with a
    trailing axis of length ``L`` (one column per kernel variant) and vanish at
    ``rho = inf``. Returns ``(inside, total, inside_half, total_half)`` each of
    shape ``(m, L)``; the ``*_half`` values use every other direction and serve
    as an angular-quadrature error estimate.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dim = points.shape[1]
    dirs, wts = sphere_directions(dim, n_dirs)
    half = np.zeros(len(wts))
    if dim == 1:
        half[:] = wts
    elif dim == 2:
        half[::2] = 2 * wts[::2]
    else:
        m = len(wts) // n_dirs
        half = np.zeros((m, n_dirs))
        half[:, ::2] = 2 * wts.reshape(m, n_dirs)[:, ::2]
        half = half.reshape(-1)
    lo = np.broadcast_to(np.atleast_2d(np.asarray(lo, dtype=float)), points.shape)
    hi = np.broadcast_to(np.atleast_2d(np.asarray(hi, dtype=float)), points.shape)
    outs = []
    for s in range(0, len(points), chunk):
        sl = slice(s, s + chunk)
        p = points[sl]
        start, end, inside = ray_segments(p, lo[sl], hi[sl], shape, dirs)
        seg = upper_tail(start) - upper_tail(end)
        rho_b = start[..., 0]
        tot = upper_tail(rho_b)
        ins = (seg * inside[..., None]).sum(axis=2)
        outs.append(
            (
                np.einsum("mkl,k->ml", ins, wts),
                np.einsum("mkl,k->ml", tot, wts),
                np.einsum("mkl,k->ml", ins, half),
                np.einsum("mkl,k->ml", tot, half),
            )
        )
    return tuple(np.concatenate(parts, axis=0) for parts in zip(*outs))
