"""Interaction energies of cell sets and the localized fractional perimeter.

``L(A, B)`` is the sum of cell-pair weights between ``A`` and ``B``. The
localized energy of a resolved field with free region ``O`` is

    J(E) = L(E & O, CE) + L(E - O, CE & O),

where the sets extend beyond the box through the field's exterior shape.
Pairs inside the box are summed exactly; pairs with a partner beyond the
box enter through analytic tail integrals with an explicit error estimate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import CellSet, GridError, PhaseField, cells_in_ball
from .kernel import KernelTable
from .sets import Complement, Shape
from .tails import TailField, exterior_tails

TERM_1 = "L(E∩Ω, CE)"
TERM_2 = "L(E∖Ω, CE∩Ω)"


@dataclass
class EnergyReport:
    """Decomposed localized energy. ``J_value`` is the two box terms plus the tail."""

    L_terms: dict
    J_value: float
    tail_term: float
    tail_error_bound: float
    extra: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "L_terms": dict(self.L_terms),
            "J_value": self.J_value,
            "tail_term": self.tail_term,
            "tail_error_bound": self.tail_error_bound,
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)


def _fsum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel())


def _check_grid(grid, K: KernelTable):
    if grid != K.grid:
        raise GridError("cell set and kernel table live on different grids")


def _pair_sum(a_idx: np.ndarray, b_idx: np.ndarray, K: KernelTable, chunk: int = 1 << 22) -> float:
    """``sum_{a, b} w(a - b)`` by direct gathering; partial sums are combined with fsum."""
    if len(a_idx) == 0 or len(b_idx) == 0:
        return 0.0
    ext = np.array(K.grid.extent)
    flat_w = K.weights.ravel()
    strides = np.cumprod([1] + [2 * e - 1 for e in ext[::-1]][:-1])[::-1]
    a_key = (a_idx + ext - 1) @ strides
    b_key = b_idx @ strides
    rows = max(1, chunk // len(b_key))
    parts = []
    for start in range(0, len(a_key), rows):
        keys = a_key[start : start + rows, None] - b_key[None, :]
        parts.append(flat_w[keys].sum(axis=1))
    return _fsum(np.concatenate(parts))


def interaction(
    A: CellSet,
    B: CellSet,
    K: KernelTable,
    b_exterior: Shape | None = None,
    tails: TailField | None = None,
) -> float:
    """``L(A, B)``: sum of ``w(a - b)`` over member pairs; shared cells contribute 0.

    When ``b_exterior`` is given, ``B`` also contains that shape beyond the
    box and the cell-averaged tail of each ``a`` is added.
    """
    _check_grid(A.grid, K)
    _check_grid(B.grid, K)
    value = _pair_sum(A.indices(), B.indices(), K)
    if b_exterior is not None:
        if tails is None:
            tails = exterior_tails(K.grid, b_exterior, K.s, A.mask)
        value += K.grid.cell_volume * _fsum(tails.t_in[A.mask])
    return value


def fft_cut_energy(field: PhaseField, K: KernelTable) -> float:
    """Box-restricted ``L(E, CE)`` through one zero-padded FFT convolution."""
    _check_grid(field.grid, K)
    field.require_resolved()
    inside = field.inside
    if inside.all() or not inside.any():
        return 0.0
    conv = K.convolve((~inside).astype(float))
    return _fsum(conv[inside])


def brute_cut_energy(field: PhaseField, K: KernelTable) -> float:
    """Box-restricted ``L(E, CE)`` by O(N^2) direct summation."""
    _check_grid(field.grid, K)
    field.require_resolved()
    return _pair_sum(np.argwhere(field.inside), np.argwhere(~field.inside), K)


def local_energy(
    field: PhaseField,
    K: KernelTable,
    tails: TailField | None = None,
    method: str = "fft",
) -> EnergyReport:
    """Localized energy of a resolved field with the tail beyond the box.

    ``method`` selects FFT convolution or direct pair summation for the box part.
    """
    _check_grid(field.grid, K)
    field.require_resolved()
    E = field.inside
    O = field.region
    CE = ~E
    if method == "fft":
        l1 = _fsum(K.convolve(CE.astype(float))[E & O]) if (E & O).any() else 0.0
        fixed_in = E & ~O
        l2 = _fsum(K.convolve(fixed_in.astype(float))[CE & O]) if (CE & O).any() and fixed_in.any() else 0.0
    elif method == "direct":
        l1 = _pair_sum(np.argwhere(E & O), np.argwhere(CE), K)
        l2 = _pair_sum(np.argwhere(E & ~O), np.argwhere(CE & O), K)
    else:
        raise ValueError(f"unknown method {method!r}")
    if tails is None:
        tails = exterior_tails(field.grid, field.exterior, K.s, O)
    hn = field.grid.cell_volume
    tail = hn * (_fsum(tails.t_out[E & O]) + _fsum(tails.t_in[CE & O]))
    err = hn * (_fsum(tails.err_out[E & O]) + _fsum(tails.err_in[CE & O]))
    return EnergyReport({TERM_1: l1, TERM_2: l2}, l1 + l2 + tail, tail, err)


def flip_gain(field: PhaseField, K: KernelTable, tails: TailField | None = None) -> np.ndarray:
    """Energy change ``kappa`` of moving each cell from IN to OUT, everything else fixed.

    ``kappa = (W * u) + h^n (t_in - t_out)`` with ``u = +-1``; moving a cell from
    OUT to IN changes the energy by ``-kappa``. Values are returned on the free
    region and are zero elsewhere.
    """
    _check_grid(field.grid, K)
    field.require_resolved()
    O = field.region
    if tails is None:
        tails = exterior_tails(field.grid, field.exterior, K.s, O)
    kappa = K.convolve(field.signed()) + field.grid.cell_volume * (tails.t_in - tails.t_out)
    return np.where(O, kappa, 0.0)


def scalar_energy(
    field: PhaseField,
    K: KernelTable,
    r: float,
    center=None,
    tails: TailField | None = None,
) -> float:
    """``J_r(u)`` for ``u = chi_E - chi_CE``: ``|u(x) - u(y)|^2``-weighted pairs with ``x`` in ``B_r``.

    Pairs with both points in the ball count once per ordering, pairs with one
    point outside count twice. Uses ``|u(x) - u(y)|^2 = 2 - 2 u(x) u(y)``.
    """
    _check_grid(field.grid, K)
    field.require_resolved()
    grid = field.grid
    if center is None:
        center = 0.5 * (grid.lo + grid.hi)
    center = np.asarray(center, dtype=float)
    if np.any(center - r < grid.lo - 1e-12) or np.any(center + r > grid.hi + 1e-12):
        raise GridError(f"ball of radius {r} around {center} exceeds the grid box")
    ball = cells_in_ball(grid, center, r).mask
    u = field.signed()
    mult = np.where(ball, 1.0, 2.0)
    box = K.convolve(mult) * 2.0 - 2.0 * u * K.convolve(u * mult)
    if tails is None:
        tails = exterior_tails(grid, field.exterior, K.s, ball)
    opposite = np.where(u > 0, tails.t_out, tails.t_in)
    tail = 2.0 * 4.0 * grid.cell_volume * opposite
    return _fsum(box[ball]) + _fsum(tail[ball])


def minimality_identity(E: PhaseField, F: PhaseField, K: KernelTable, tails: TailField | None = None):
    """Both sides of the energy-difference identity for fields agreeing off the free region.

    With ``A+ = F \\ E`` and ``A- = E \\ F`` the right-hand side is

        [L(A-, E \\ A-) - L(A-, CE)] - [L(A+, E) - L(A+, C(E u A+))] + 2 L(A-, A+),

    where complements include the exterior beyond the box. Returns
    ``(J(F) - J(E), rhs)``.
    """
    _check_grid(E.grid, K)
    E.require_resolved()
    F.require_resolved()
    if not np.array_equal(E.region, F.region) or np.any((E.inside != F.inside) & ~E.region):
        raise GridError("fields must share the free region and agree outside it")
    grid = E.grid
    if tails is None:
        tails = exterior_tails(grid, E.exterior, K.s, E.region)
    comp = TailField(tails.t_out, tails.t_tot, tails.err_out, tails.err_tot)
    ext_c = Complement(E.exterior)
    e, f = E.inside, F.inside
    a_plus = CellSet(grid, f & ~e)
    a_minus = CellSet(grid, e & ~f)
    rhs = (
        interaction(a_minus, CellSet(grid, e & ~a_minus.mask), K, E.exterior, tails)
        - interaction(a_minus, CellSet(grid, ~e), K, ext_c, comp)
        - interaction(a_plus, CellSet(grid, e), K, E.exterior, tails)
        + interaction(a_plus, CellSet(grid, ~(e | a_plus.mask)), K, ext_c, comp)
        + 2.0 * interaction(a_minus, a_plus, K)
    )
    lhs = local_energy(F, K, tails).J_value - local_energy(E, K, tails).J_value
    return lhs, rhs
