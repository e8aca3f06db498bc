import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracmin.energy import (
    TERM_1,
    TERM_2,
    brute_cut_energy,
    fft_cut_energy,
    interaction,
    local_energy,
    minimality_identity,
    scalar_energy,
)
from fracmin.grid import IN, OUT, CellSet, Grid, GridError, PhaseField, cells_in_ball
from fracmin.kernel import FractionalOrder, build_table
from fracmin.sets import Complement, Everything, HalfSpace, Nothing
from fracmin.tails import exterior_tails


def dense_weights(K):
    """Full pair matrix built from the offset table (oracle for summation paths)."""
    g = K.grid
    idx = np.argwhere(np.ones(g.shape, bool))
    d = idx[:, None, :] - idx[None, :, :] + np.array(g.extent) - 1
    return K.weights[tuple(np.moveaxis(d, -1, 0))]


def half_line_tail(x_lo, x_hi, R, s):
    """Cell-averaged int_{y > R} (y - x)^-(1+s) dy for the cell [x_lo, x_hi]."""
    return ((R - x_lo) ** (1 - s) - (R - x_hi) ** (1 - s)) / (s * (1 - s) * (x_hi - x_lo))


def test_interaction_adjacent_cells():
    g = Grid((0.0,), (2,), 1.0)
    K = build_table(g, FractionalOrder(0.5))
    A = CellSet(g, np.array([True, False]))
    B = CellSet(g, np.array([False, True]))
    assert interaction(A, B, K) == pytest.approx(8 - 4 * math.sqrt(2), rel=1e-12)
    assert interaction(A, A, K) == 0.0


sets2 = st.lists(st.integers(0, 2), min_size=36, max_size=36)


@given(sets2, st.lists(st.booleans(), min_size=36, max_size=36))
def test_interaction_additive_and_symmetric(parts, bmask):
    g = Grid((0.0, 0.0), (6, 6), 0.2)
    K = build_table(g, FractionalOrder(0.35))
    parts = np.array(parts).reshape(6, 6)
    A1, A2 = CellSet(g, parts == 1), CellSet(g, parts == 2)
    B = CellSet(g, np.array(bmask).reshape(6, 6))
    whole = interaction(A1 | A2, B, K)
    assert whole == pytest.approx(interaction(A1, B, K) + interaction(A2, B, K), rel=1e-12, abs=1e-14)
    assert interaction(B, A1, K) == pytest.approx(interaction(A1, B, K), rel=1e-12, abs=1e-14)
    assert whole >= 0.0


def test_trivial_energies():
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], 0.25)
    K = build_table(g, FractionalOrder(0.5))
    region = np.ones(g.shape, bool)
    empty = PhaseField(g, np.full(g.shape, OUT, np.int8), region, Nothing(2))
    full = PhaseField(g, np.full(g.shape, IN, np.int8), region, Everything(2))
    assert local_energy(empty, K).J_value == 0.0
    assert local_energy(full, K).J_value == 0.0


@pytest.mark.parametrize("s", [0.3, 0.5, 0.8])
def test_1d_half_line_against_enlarged_box(s):
    h = 0.25
    g = Grid.box([-1.0], [1.0], h)
    K = build_table(g, FractionalOrder(s))
    shape = HalfSpace([1.0], 0.0)
    f = PhaseField.from_shape(g, shape, np.ones(g.shape, bool)).with_inside(g.rasterize(shape))
    rep = local_energy(f, K)
    # oracle: all pairs inside [-4, 4], plus closed-form tails beyond it
    big = Grid.box([-4.0], [4.0], h)
    W = dense_weights(build_table(big, FractionalOrder(s)))
    x = big.centers()[:, 0]
    E = x <= 0
    O = np.abs(x) < 1
    box = W[np.ix_(E & O, ~E)].sum() + W[np.ix_(E & ~O, ~E & O)].sum()
    lo = x - h / 2
    tail = h * (half_line_tail(lo[E & O], lo[E & O] + h, 4.0, s).sum())
    tail += h * (half_line_tail(-(lo[~E & O] + h), -lo[~E & O], 4.0, s).sum())
    oracle = box + tail
    assert abs(rep.J_value - oracle) <= rep.tail_error_bound + 1e-9 * oracle


def test_report_structure_and_json():
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], 0.125)
    K = build_table(g, FractionalOrder(0.4))
    region = (g.centers() ** 2).sum(-1) < 0.5
    f = PhaseField.from_shape(g, HalfSpace([0.2, 1.0], 0.1), region).with_inside(g.rasterize(HalfSpace([0.2, 1.0], 0.1)))
    rep = local_energy(f, K)
    assert set(rep.L_terms) == {TERM_1, TERM_2}
    assert all(v >= 0 for v in rep.L_terms.values())
    assert rep.J_value == pytest.approx(sum(rep.L_terms.values()) + rep.tail_term, rel=1e-15)
    data = json.loads(rep.to_json())
    assert set(data["L_terms"]) == {"L(E∩Ω, CE)", "L(E∖Ω, CE∩Ω)"}
    direct = local_energy(f, K, method="direct")
    assert direct.J_value == pytest.approx(rep.J_value, rel=1e-10)


def test_fft_cut_energy_examples():
    rng = np.random.default_rng(3)
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], 1 / 16)
    K = build_table(g, FractionalOrder(0.5))
    for _ in range(3):
        f = PhaseField(g, (rng.random(g.shape) < 0.5).astype(np.int8), np.zeros(g.shape, bool))
        assert fft_cut_energy(f, K) == pytest.approx(brute_cut_energy(f, K), rel=1e-8)
    full = PhaseField(g, np.full(g.shape, IN, np.int8), np.zeros(g.shape, bool))
    assert fft_cut_energy(full, K) == 0.0
    g1 = Grid((0.0,), (64,), 1.0)
    K1 = build_table(g1, FractionalOrder(0.5))
    labels = np.zeros(64, np.int8)
    labels[32] = IN
    single = PhaseField(g1, labels, np.zeros(64, bool))
    F = lambda u: -4 * abs(u) ** 0.5
    expect = math.fsum(F(d + 1) - 2 * F(d) + F(d - 1) for d in range(-32, 32) if d)
    assert fft_cut_energy(single, K1) == pytest.approx(expect, rel=1e-10)


def ball_region(g, r):
    return cells_in_ball(g, 0.5 * (g.lo + g.hi), r).mask


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_scalar_energy_is_eight_local_energies(s):
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], 0.1)
    K = build_table(g, FractionalOrder(s))
    shape = HalfSpace([0.4, 1.0], 0.05)
    for r in (0.5, 1.0):
        O = ball_region(g, r)
        f = PhaseField.from_shape(g, shape, O).with_inside(g.rasterize(shape))
        J = local_energy(f, K).J_value
        assert scalar_energy(f, K, r) == pytest.approx(8 * J, rel=1e-10)


def test_scalar_energy_against_dense_sum():
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], 0.05)
    s = 0.5
    K = build_table(g, FractionalOrder(s))
    shape = HalfSpace.lower(2)
    f = PhaseField.from_shape(g, shape, free=False)
    val = scalar_energy(f, K, 1.0)
    u = f.signed().ravel()
    B = ball_region(g, 1.0).ravel()
    W = dense_weights(K)
    diff2 = (u[:, None] - u[None, :]) ** 2 * W
    box = diff2[np.ix_(B, B)].sum() + 2 * diff2[np.ix_(B, ~B)].sum()
    t = exterior_tails(g, shape, s, B.reshape(g.shape))
    opposite = np.where(u > 0, t.t_out.ravel(), t.t_in.ravel())
    tail = 2 * 4 * g.cell_volume * opposite[B].sum()
    assert val > 0
    assert val == pytest.approx(box + tail, rel=1e-9)
    empty = PhaseField(g, np.full(g.shape, OUT, np.int8), np.zeros(g.shape, bool))
    assert scalar_energy(empty, K, 0.5) == 0.0
    with pytest.raises(GridError):
        scalar_energy(f, K, 1.2)


def random_field(seed, dim=2, side=8):
    rng = np.random.default_rng(seed)
    g = Grid.box([-1.0] * dim, [1.0] * dim, 2 / side)
    region = rng.random(g.shape) < 0.6
    inside = rng.random(g.shape) < 0.5
    ext = HalfSpace(rng.normal(size=dim), rng.uniform(-0.5, 0.5))
    return PhaseField(g, np.where(inside, IN, OUT).astype(np.int8), region, ext), rng


@given(st.integers(0, 10_000), st.floats(0.1, 0.9))
def test_complement_symmetry(seed, s):
    f, _ = random_field(seed)
    K = build_table(f.grid, FractionalOrder(round(s, 2)))
    a = local_energy(f, K).J_value
    b = local_energy(f.complement(), K).J_value
    assert b == pytest.approx(a, rel=1e-10)


@given(st.integers(0, 10_000), st.sampled_from([1, 2]), st.floats(0.1, 0.9))
def test_minimality_identity(seed, dim, s):
    E, rng = random_field(seed, dim, (32, 8)[dim - 1])
    K = build_table(E.grid, FractionalOrder(round(s, 2)))
    F = E.with_inside(np.where(E.region, rng.random(E.grid.shape) < 0.5, E.inside))
    lhs, rhs = minimality_identity(E, F, K)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1e-12)
