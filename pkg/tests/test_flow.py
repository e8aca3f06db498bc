import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracmin.flow import (
    build_flow_kernel,
    convolved_phase,
    extinction_step,
    mbo_step,
    run_flow,
    write_traces_csv,
)
from fracmin.grid import Grid, PhaseField
from fracmin.kernel import FractionalOrder
from fracmin.sets import Ball, Everything, HalfSpace, Nothing


def square(side, half=1.0):
    return Grid.box([-half, -half], [half, half], 2 * half / side)


@given(st.floats(0.1, 0.9), st.floats(1e-3, 1.0), st.sampled_from([1, 2]))
def test_kernel_mass_symmetry_monotone(s, t, dim):
    g = Grid.box([-1.0] * dim, [1.0] * dim, 2.0 / (40, 12)[dim - 1])
    k = build_flow_kernel(g, FractionalOrder(s), t)
    w = k.samples
    assert w.sum() == pytest.approx(1.0, rel=1e-12)
    assert np.all(w >= 0)
    for ax in range(dim):
        assert np.array_equal(w, np.flip(w, ax))
    if dim == 2:
        assert np.allclose(w, w.T, rtol=1e-14, atol=0)
    axes = [np.arange(-(e - 1), e) for e in g.extent]
    r2 = sum(np.meshgrid(*[a**2 for a in axes], indexing="ij")).ravel()
    order = np.argsort(r2, kind="stable")
    v = w.ravel()[order]
    assert np.all(np.diff(v) <= 1e-15 * v[0])


def test_kernel_power_law_tail():
    g = Grid.box([-1.0], [1.0], 0.01)
    k = build_flow_kernel(g, FractionalOrder(0.5), 0.01)
    c = g.extent[0] - 1
    ratio = k.samples[c + 20] / k.samples[c + 40]
    assert ratio == pytest.approx(2**1.5, rel=0.05)


def test_kernel_flags_and_errors():
    g = square(16)
    assert build_flow_kernel(g, FractionalOrder(0.5), 1e-6).degenerate
    assert not build_flow_kernel(g, FractionalOrder(0.5), 0.5).degenerate
    assert not build_flow_kernel(g, FractionalOrder(0.5), 0.5).local_regime
    with pytest.raises(ValueError):
        build_flow_kernel(g, FractionalOrder(0.5), 0.0)


def test_half_plane_is_a_fixed_point():
    g = square(64)
    f = PhaseField.from_shape(g, HalfSpace.lower(2), np.ones(g.shape, bool), free=False)
    k = build_flow_kernel(g, FractionalOrder(0.5), 0.1)
    traces, final = run_flow(f, k, 50)
    assert np.array_equal(final.inside, f.inside)
    assert len(traces) == 2
    assert traces[0].measure == traces[1].measure
    assert traces[0].interface_cells == traces[1].interface_cells
    cur = f
    for _ in range(50):
        cur = mbo_step(cur, k)
    assert np.array_equal(cur.inside, f.inside)


@pytest.mark.parametrize("shape", [Everything(2), Nothing(2)])
def test_full_and_empty_are_fixed(shape):
    g = square(32)
    f = PhaseField.from_shape(g, shape, np.ones(g.shape, bool), free=False)
    k = build_flow_kernel(g, FractionalOrder(0.5), 0.2)
    assert np.array_equal(mbo_step(f, k).inside, f.inside)


def disk_field(g, r, center=(0.0, 0.0)):
    return PhaseField(
        g,
        g.rasterize(Ball(center, r)).astype(np.int8),
        np.ones(g.shape, bool),
        Nothing(2),
    )


def test_disk_shrinks_every_step():
    g = square(64)
    ell = 0.025
    k = build_flow_kernel(g, FractionalOrder(0.5), ell**0.5)
    traces, final = run_flow(disk_field(g, 0.5), k, 400)
    m = [tr.measure for tr in traces]
    assert m[-1] == 0.0
    assert all(b < a for a, b in zip(m, m[1:]))
    assert extinction_step(traces) == traces[-1].step


@given(st.integers(0, 10_000))
def test_comparison_principle(seed):
    rng = np.random.default_rng(seed)
    g = square(32)
    k = build_flow_kernel(g, FractionalOrder(rng.uniform(0.2, 0.8)), rng.uniform(0.05, 0.5))
    c = rng.uniform(-0.3, 0.3, 2)
    r = rng.uniform(0.2, 0.4)
    small = disk_field(g, r, c)
    big_inside = small.inside | g.rasterize(Ball(c + rng.uniform(-0.1, 0.1, 2), r + 0.1))
    big_inside |= rng.random(g.shape) < 0.05
    big = small.with_inside(big_inside)
    assert np.all(mbo_step(small, k).inside <= mbo_step(big, k).inside)


def test_translation_equivariance():
    g = square(96, 1.5)
    k = build_flow_kernel(g, FractionalOrder(0.5), 0.15)
    a = mbo_step(disk_field(g, 0.4), k).inside
    b = mbo_step(disk_field(g, 0.4, (g.h, 0.0)), k).inside
    core = (slice(20, 76), slice(20, 76))
    shifted = np.roll(a, 1, axis=0)
    assert np.array_equal(b[core], shifted[core])


@given(st.integers(0, 10_000))
def test_complement_duality(seed):
    rng = np.random.default_rng(seed)
    g = square(32)
    k = build_flow_kernel(g, FractionalOrder(rng.uniform(0.2, 0.8)), rng.uniform(0.05, 0.5))
    shape = HalfSpace(rng.normal(size=2), rng.uniform(-0.3, 0.3))
    region = rng.random(g.shape) < 0.7
    inside = rng.random(g.shape) < 0.5
    f = PhaseField(g, inside.astype(np.int8), region, shape)
    cf = PhaseField(g, (~inside).astype(np.int8), region, shape.complement())
    v = convolved_phase(f, k)
    assert np.allclose(convolved_phase(cf, k), -v, atol=1e-12)
    a, b = mbo_step(f, k).inside, mbo_step(cf, k).inside
    differ = region & (a == b)
    assert np.all(np.abs(v[differ]) < 1e-12)


def test_two_far_disks_shrink_like_one():
    g = Grid((-1.5, -0.75), (384, 192), 1 / 128)
    k = build_flow_kernel(g, FractionalOrder(0.5), 0.01**0.5)
    one = PhaseField(g, g.rasterize(Ball((-0.8, 0.0), 0.3)).astype(np.int8), np.ones(g.shape, bool), Nothing(2))
    both = one.with_inside(one.inside | g.rasterize(Ball((0.8, 0.0), 0.3)))
    t_one = extinction_step(run_flow(one, k, 500)[0])
    t_both = extinction_step(run_flow(both, k, 500)[0])
    assert t_one > 20 and t_both
    assert t_both == pytest.approx(t_one, rel=0.05)


def test_traces_csv(tmp_path):
    g = square(32)
    k = build_flow_kernel(g, FractionalOrder(0.5), 0.2)
    traces, _ = run_flow(disk_field(g, 0.3), k, 5)
    path = tmp_path / "t.csv"
    write_traces_csv(traces, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["step", "measure", "interface_cells", "r_min", "r_max"]
    assert len(rows) == len(traces) + 1
    assert float(rows[1][1]) == traces[0].measure > 0
