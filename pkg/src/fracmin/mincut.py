"""Exact minimization of the localized energy over the free cells via minimum cut.

With ``x_i = 1`` meaning IN, the energy of a labelling of the free cells is

    constant + sum_i (x_i c_in_i + (1 - x_i) c_out_i) + sum_{i<j} w_ij [x_i != x_j]

with ``w_ij > 0``. Such a function is submodular and its minimum equals a
minimum s-t cut: the source side is OUT, the sink side is IN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy import sparse

from .energy import flip_gain
from .grid import FREE, GridError, PhaseField
from .kernel import KernelTable, tail_integral
from .maxflow import min_cut
from .tails import TailField, exterior_tails

DENSE_CAP = 40_000
_SCALE = 1e12


class CapacityError(RuntimeError):
    """The requested dense problem exceeds the free-cell budget."""


@dataclass(eq=False)
class CutProblem:
    """Quadratic pseudo-Boolean form of the energy over the free cells.

    ``free`` holds flat grid indices of the free cells in row-major order;
    pair and unary indices refer to positions in ``free``.
    """

    field: PhaseField
    free: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_w: np.ndarray
    unary_in: np.ndarray
    unary_out: np.ndarray
    constant: float = 0.0
    cutoff: Optional[float] = None
    neglected_bound: float = 0.0
    _adj: Optional[sparse.csr_matrix] = dc_field(default=None, repr=False)

    @property
    def n_free(self) -> int:
        return len(self.free)

    @property
    def adjacency(self) -> sparse.csr_matrix:
        if self._adj is None:
            k = self.n_free
            m = sparse.coo_matrix((self.pair_w, (self.pair_i, self.pair_j)), shape=(k, k))
            self._adj = (m + m.T).tocsr()
        return self._adj

    def energy(self, labels) -> float:
        """Energy of a boolean labelling of the free cells (True = IN)."""
        x = np.asarray(labels, dtype=bool)
        cut = x[self.pair_i] != x[self.pair_j]
        return math.fsum(
            [self.constant]
            + list(self.unary_in[x])
            + list(self.unary_out[~x])
            + list(self.pair_w[cut])
        )

    def batch_energy(self, labels: np.ndarray) -> np.ndarray:
        """Energies of many labellings at once, ``labels`` of shape ``(m, k)``."""
        x = np.asarray(labels, dtype=bool)
        xf = x.astype(float)
        e = self.constant + xf @ self.unary_in + (1.0 - xf) @ self.unary_out
        cut = (x[:, self.pair_i] != x[:, self.pair_j]).astype(float)
        return e + cut @ self.pair_w

    def flip_gains(self, labels) -> np.ndarray:
        """Energy change of moving each cell from IN to OUT (negated for OUT cells)."""
        x = np.asarray(labels, dtype=bool)
        u = np.where(x, 1.0, -1.0)
        return self.unary_out - self.unary_in + self.adjacency @ u

    def to_field(self, labels) -> PhaseField:
        inside = np.zeros(self.field.grid.n_cells, dtype=bool)
        inside[self.free] = np.asarray(labels, dtype=bool)
        return self.field.with_inside(inside.reshape(self.field.grid.shape))

    def labels_of(self, field: PhaseField) -> np.ndarray:
        field.require_resolved()
        return field.inside.ravel()[self.free]

    def dump(self, path):
        """Debug text dump: ``pair i j w`` and ``unary i c_in c_out`` lines."""
        with open(path, "w") as fh:
            for i, j, w in zip(self.pair_i, self.pair_j, self.pair_w):
                fh.write(f"pair {i} {j} {w:.17g}\n")
            for i, (a, b) in enumerate(zip(self.unary_in, self.unary_out)):
                fh.write(f"unary {i} {a:.17g} {b:.17g}\n")


def _half_offsets(grid, cutoff):
    """Lattice offsets ``D != 0`` with ``|D| h <= cutoff``, one of each pair ``+-D``."""
    r = int(math.floor(cutoff / grid.h + 1e-9))
    rng = [np.arange(-min(r, e - 1), min(r, e - 1) + 1) for e in grid.extent]
    mesh = np.stack(np.meshgrid(*rng, indexing="ij"), axis=-1).reshape(-1, grid.dim)
    keep = (mesh**2).sum(axis=1) * grid.h**2 <= cutoff**2 * (1 + 1e-12)
    mesh = mesh[keep]
    # lexicographically positive half
    first = np.argmax(mesh != 0, axis=1)
    lead = mesh[np.arange(len(mesh)), first]
    return mesh[(lead > 0)]


def _free_pairs(grid, free_mask, K, cutoff):
    flat_idx = -np.ones(grid.n_cells, dtype=np.int64)
    free_flat = np.flatnonzero(free_mask.ravel())
    flat_idx[free_flat] = np.arange(len(free_flat))
    idx = flat_idx.reshape(grid.shape)
    if cutoff is None:
        pos = np.argwhere(free_mask)
        k = len(pos)
        ii, jj = np.triu_indices(k, 1)
        delta = pos[ii] - pos[jj] + np.array(grid.extent) - 1
        w = K.weights[tuple(delta.T)]
        return ii.astype(np.int64), jj.astype(np.int64), w
    pi, pj, pw = [], [], []
    for d in _half_offsets(grid, cutoff):
        a = tuple(slice(max(0, -di), e - max(0, di)) for di, e in zip(d, grid.extent))
        b = tuple(slice(max(0, di), e - max(0, -di)) for di, e in zip(d, grid.extent))
        ia = idx[a].ravel()
        ib = idx[b].ravel()
        ok = (ia >= 0) & (ib >= 0)
        if ok.any():
            pi.append(ia[ok])
            pj.append(ib[ok])
            pw.append(np.full(int(ok.sum()), K.weight(d)))
    if not pi:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    return np.concatenate(pi), np.concatenate(pj), np.concatenate(pw)


def assemble(
    field: PhaseField,
    K: KernelTable,
    cutoff: Optional[float] = None,
    tails: Optional[TailField] = None,
) -> CutProblem:
    """Cut form of the energy over the free region of ``field``.

    Interactions between free cells and fixed cells (inside the box and, via
    tail integrals, beyond it) are always kept in full. With ``cutoff`` the
    free-free pairs farther apart than ``cutoff`` are dropped, and a bound on
    the dropped interaction mass is reported in ``neglected_bound``.
    """
    grid = field.grid
    if grid != K.grid:
        raise GridError("field and kernel table live on different grids")
    O = field.region
    if not O.any():
        raise GridError("the free region is empty")
    if cutoff is None and int(O.sum()) > DENSE_CAP:
        raise CapacityError(
            f"{int(O.sum())} free cells exceed the dense cap of {DENSE_CAP}; set a cutoff"
        )
    if cutoff is not None and not cutoff > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    fixed_in = field.inside & ~O
    fixed_out = (field.labels == 0) & ~O
    if tails is None:
        tails = exterior_tails(grid, field.exterior, K.s, O)
    hn = grid.cell_volume
    c_in = hn * tails.t_out
    c_out = hn * tails.t_in
    if fixed_out.any():
        c_in = c_in + K.convolve(fixed_out.astype(float))
    if fixed_in.any():
        c_out = c_out + K.convolve(fixed_in.astype(float))
    c_in = c_in[O]
    c_out = c_out[O]
    low = np.minimum(c_in, c_out)
    constant = math.fsum(low)
    c_in = np.maximum(c_in - low, 0.0)
    c_out = np.maximum(c_out - low, 0.0)
    pi, pj, pw = _free_pairs(grid, O, K, cutoff)
    neglected = 0.0
    if cutoff is not None:
        neglected = tail_integral(grid, K.order, None, cutoff) * hn * int(O.sum())
    return CutProblem(
        field=field,
        free=np.flatnonzero(O.ravel()),
        pair_i=pi,
        pair_j=pj,
        pair_w=pw,
        unary_in=c_in,
        unary_out=c_out,
        constant=constant,
        cutoff=cutoff,
        neglected_bound=neglected,
    )


@dataclass
class CutSolution:
    labels: np.ndarray
    energy: float
    rounding_bound: float
    scale: float


def solve_cut(p: CutProblem) -> CutSolution:
    """Global minimizer of ``p``; cells whose label is undecided by the cut go OUT.

    Weights are scaled so that the largest capacity is ``1e12`` and rounded to
    integers; ``rounding_bound`` bounds the resulting energy error of any
    labelling in original units.
    """
    k = p.n_free
    caps_max = max(
        float(p.unary_in.max(initial=0.0)),
        float(p.unary_out.max(initial=0.0)),
        float(p.pair_w.max(initial=0.0)),
    )
    if caps_max == 0.0:
        labels = np.zeros(k, dtype=bool)
        return CutSolution(labels, p.energy(labels), 0.0, 1.0)
    total = math.fsum(p.unary_in) + math.fsum(p.unary_out) + 2 * math.fsum(p.pair_w)
    scale = min(_SCALE / caps_max, 2.0**62 / total)
    nodes = np.arange(k)
    s, t = k, k + 1
    tails = np.concatenate([np.full(k, s), nodes])
    heads = np.concatenate([nodes, np.full(k, t)])
    caps = np.rint(np.concatenate([p.unary_in, p.unary_out]) * scale).astype(np.int64)
    w = np.rint(p.pair_w * scale).astype(np.int64)
    _, sink = min_cut(k + 2, tails, heads, caps, (p.pair_i, p.pair_j, w), s=s, t=t)
    labels = sink[:k].copy()
    bound = 0.5 * (k + len(p.pair_w)) / scale
    return CutSolution(labels, p.energy(labels), bound, scale)


def solve_exact(p: CutProblem) -> PhaseField:
    """Resolved field attaining the minimum of ``p`` (ties toward OUT)."""
    return p.to_field(solve_cut(p).labels)


def enumerate_minimum(p: CutProblem, chunk: int = 1 << 14):
    """Exhaustive minimum over all labellings (oracle for small problems).

    Returns ``(labels, energy)``; among equal energies the first in binary
    counting order (fewest IN cells first in each block) is kept.
    """
    k = p.n_free
    if k > 22:
        raise ValueError(f"refusing to enumerate 2^{k} labellings")
    best_e = math.inf
    best = None
    bits = np.arange(k)
    for start in range(0, 1 << k, chunk):
        codes = np.arange(start, min(start + chunk, 1 << k))
        X = ((codes[:, None] >> bits[None, :]) & 1).astype(bool)
        e = p.batch_energy(X)
        j = int(np.argmin(e))
        if e[j] < best_e:
            best_e = float(e[j])
            best = X[j]
    return best, p.energy(best)


def _tolerance(p: CutProblem) -> float:
    scale = max(
        float(p.unary_in.max(initial=0.0)),
        float(p.unary_out.max(initial=0.0)),
        float(np.asarray(abs(p.adjacency).sum(axis=1)).max(initial=0.0)) if p.n_free else 0.0,
    )
    return 1e-9 * max(scale, 1e-300)


def certify_minimizer(
    field: PhaseField,
    K: KernelTable,
    cutoff: Optional[float] = None,
    tails: Optional[TailField] = None,
    tol: Optional[float] = None,
):
    """Check that no single free-cell flip lowers the energy.

    Returns ``(ok, worst_margin)`` where the margin of a cell is the energy
    increase caused by flipping it. Without ``cutoff`` the full energy
    (all box pairs plus tails) is used; with it, the truncated cut energy.
    """
    field.require_resolved()
    if cutoff is None:
        kappa = flip_gain(field, K, tails)[field.region]
        inside = field.inside[field.region]
        margin = np.where(inside, kappa, -kappa)
        if tol is None:
            tol = 1e-9 * K.row_sum()
    else:
        p = assemble(field, K, cutoff, tails)
        x = p.labels_of(field)
        g = p.flip_gains(x)
        margin = np.where(x, g, -g)
        if tol is None:
            tol = _tolerance(p)
    worst = float(margin.min()) if margin.size else 0.0
    return worst >= -tol, worst


def local_search(
    field: PhaseField,
    K: KernelTable,
    seed: int = 0,
    cutoff: Optional[float] = None,
    return_trace: bool = False,
    max_passes: int = 10_000,
):
    """Greedy single-flip descent to a flip-stable labelling.

    Unresolved fields start from a random labelling drawn with ``seed``;
    resolved fields start from their own labels. Cells are visited in a
    seeded random order and flipped when that strictly lowers the energy.
    """
    rng = np.random.default_rng(seed)
    p = assemble(field, K, cutoff)
    if np.any(field.labels[field.region] == FREE):
        x = rng.random(p.n_free) < 0.5
    else:
        x = p.labels_of(field).copy()
    tol = _tolerance(p)
    adj = p.adjacency
    u = np.where(x, 1.0, -1.0)
    sums = adj @ u
    base = p.unary_out - p.unary_in
    trace = [p.energy(x)]
    for _ in range(max_passes):
        changed = False
        for i in rng.permutation(p.n_free):
            g = base[i] + sums[i]
            delta = g if x[i] else -g  # energy increase from flipping i
            if delta < -tol:
                lo, hi = adj.indptr[i], adj.indptr[i + 1]
                step = -2.0 * u[i]
                sums[adj.indices[lo:hi]] += step * adj.data[lo:hi]
                u[i] = -u[i]
                x[i] = not x[i]
                changed = True
                trace.append(p.energy(x))
        if not changed:
            break
    out = p.to_field(x)
    return (out, trace) if return_trace else out
