"""Riesz-kernel integrals over the part of a prescribed set lying beyond the grid box.

For a cell ``x`` inside the box the quantities are

    t_in(x)  = avg_{cell} int_{y outside box, y in S} |x - y|^-(n+s) dy
    t_tot(x) = avg_{cell} int_{y outside box}          |x - y|^-(n+s) dy

Rays from the evaluation point are split where they cross the set boundary and
integrated exactly in the radial variable. Cells close to the box edge are
averaged with Gauss points because the integrand varies quickly there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .kernel import riesz_upper_tail
from .sets import Shape, exterior_integral

DEFAULT_DIRECTIONS = 256
_EDGE_LAYER = 4


@dataclass(frozen=True)
class TailField:
    """Per-cell exterior integrals with error estimates (zero outside the requested mask)."""

    t_in: np.ndarray
    t_tot: np.ndarray
    err_in: np.ndarray
    err_tot: np.ndarray

    @property
    def t_out(self) -> np.ndarray:
        return self.t_tot - self.t_in

    @property
    def err_out(self) -> np.ndarray:
        return self.err_in + self.err_tot


def _cell_points(centers, h, order):
    x, _ = np.polynomial.legendre.leggauss(order)
    w = np.polynomial.legendre.leggauss(order)[1] / 2.0
    n = centers.shape[1]
    offs = np.stack(np.meshgrid(*([x * h / 2] * n), indexing="ij"), axis=-1).reshape(-1, n)
    wts = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij"), axis=-1).reshape(-1, n), axis=1)
    return (centers[:, None, :] + offs[None, :, :]).reshape(-1, n), wts, len(offs)


def exterior_tails(
    grid: Grid,
    shape: Shape,
    s: float,
    mask: np.ndarray | None = None,
    n_dirs: int = DEFAULT_DIRECTIONS,
) -> TailField:
    """Cell-averaged exterior integrals of the Riesz kernel for the cells in ``mask``."""
    if mask is None:
        mask = np.ones(grid.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    out = [np.zeros(grid.shape) for _ in range(4)]
    if not mask.any():
        return TailField(*out)
    idx = np.argwhere(mask)
    centers = grid.lo + grid.h * (idx + 0.5)
    upper = riesz_upper_tail(s)
    lo, hi = grid.lo, grid.hi
    dist = np.minimum(centers - lo, hi - centers).min(axis=1)
    edge = dist < _EDGE_LAYER * grid.h
    n = grid.dim

    t_in = np.zeros(len(idx))
    t_tot = np.zeros(len(idx))
    e_in = np.zeros(len(idx))
    e_tot = np.zeros(len(idx))

    far = ~edge
    if far.any():
        ins, tot, ins2, tot2 = exterior_integral(centers[far], lo, hi, shape, upper, n_dirs)
        t_in[far], t_tot[far] = ins[:, 0], tot[:, 0]
        # angular estimate plus the second-order cell-averaging term
        avg = s * (s + 1) * n / 24.0 * (grid.h / dist[far]) ** 2
        e_in[far] = np.abs(ins - ins2)[:, 0] + 2 * avg * t_tot[far]
        e_tot[far] = np.abs(tot - tot2)[:, 0] + 2 * avg * t_tot[far]
    if edge.any():
        vals = {}
        for order in (2, 3):
            pts, wts, q = _cell_points(centers[edge], grid.h, order)
            ins, tot, ins2, tot2 = exterior_integral(pts, lo, hi, shape, upper, n_dirs)
            m = int(edge.sum())
            vals[order] = (
                ins[:, 0].reshape(m, q) @ wts,
                tot[:, 0].reshape(m, q) @ wts,
                np.abs(ins - ins2)[:, 0].reshape(m, q) @ wts,
                np.abs(tot - tot2)[:, 0].reshape(m, q) @ wts,
            )
        a, b = vals[2], vals[3]
        t_in[edge], t_tot[edge] = b[0], b[1]
        e_in[edge] = b[2] + np.abs(b[0] - a[0])
        e_tot[edge] = b[3] + np.abs(b[1] - a[1])

    for arr, vals in zip(out, (t_in, t_tot, e_in, e_tot)):
        arr[tuple(idx.T)] = vals
    return TailField(*out)
