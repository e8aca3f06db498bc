import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from fracmin.kernel import riesz_upper_tail
from fracmin.sets import (
    Ball,
    Complement,
    Cylinder,
    Everything,
    HalfSpace,
    Intervals,
    Nothing,
    Raster1D,
    Sectors,
    exterior_integral,
    ray_segments,
    sphere_directions,
    wedge,
)

angles = st.floats(0.05, 2 * math.pi - 0.05)


@pytest.mark.parametrize("dim,area", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi)])
def test_sphere_weights_sum_to_area(dim, area):
    dirs, w = sphere_directions(dim, 256)
    assert w.sum() == pytest.approx(area, rel=1e-12)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_wedge_half_open_convention():
    w = wedge(math.pi / 2)
    pts = np.array([[-1.0, -1.0], [1.0, -1.0], [0.0, -1.0], [0.0, 1.0], [0.0, 0.0]])
    assert w.contains(pts).tolist() == [True, False, True, False, True]


@given(angles, st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=30))
def test_wedge_complement_is_reflected_wedge(opening, pts):
    p = np.array(pts)
    p = p[np.any(p != 0, axis=1)]
    a = wedge(opening).contains(p)
    b = wedge(2 * math.pi - opening).contains(-p)
    assert np.array_equal(a, ~b)


def test_lattice_points_on_diagonal_rays_split_between_complements():
    g = np.stack(np.meshgrid(np.arange(-4, 5), np.arange(-4, 5), indexing="ij"), -1).reshape(-1, 2) + 0.5
    a = wedge(math.pi / 2).contains(g)
    b = wedge(3 * math.pi / 2).contains(-g)
    assert np.array_equal(a, ~b)


def test_complement_and_trivial_sets():
    p = np.random.default_rng(0).normal(size=(50, 2))
    ball = Ball([0.1, 0.2], 0.7)
    assert np.array_equal(Complement(ball).contains(p), ~ball.contains(p))
    assert not Nothing(2).contains(p).any()
    assert Everything(2).contains(p).all()


def test_cylinder_and_raster():
    base = Raster1D(-1.0, 0.5, np.array([True, False, True, False]), Intervals([(1.0, 2.0)]))
    x = np.array([[-0.75], [-0.25], [0.25], [0.75], [1.5], [-1.5], [3.0]])
    assert base.contains(x).tolist() == [True, False, True, False, True, False, False]
    cyl = Cylinder(base, 2)
    pts = np.array([[-0.75, 10.0], [-0.25, -3.0], [1.5, 0.0]])
    assert cyl.contains(pts).tolist() == [True, False, True]


shapes = st.sampled_from(
    [
        HalfSpace([0.3, 1.0], 0.2),
        Ball([0.5, -1.5], 1.1),
        Sectors([(0.3, 1.0), (2.5, 0.7)]),
        Complement(Ball([0.0, 0.0], 1.5)),
    ]
)


@given(shapes, st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_ray_segments_have_constant_membership(shape, x, y):
    dirs, _ = sphere_directions(2, 16)
    start, end, inside = ray_segments(np.array([[x, y]]), -1.0, 1.0, shape, dirs)
    for k in range(dirs.shape[0]):
        for a, b, flag in zip(start[0, k], end[0, k], inside[0, k]):
            if not np.isfinite(a) or not b > a:
                continue
            b = min(b, a + 50.0)
            ts = a + (b - a) * np.array([0.1, 0.5, 0.9])
            pts = np.array([x, y]) + ts[:, None] * dirs[k]
            assert np.all(shape.contains(pts) == bool(flag))


@pytest.mark.parametrize("s", [0.3, 0.5, 0.8])
def test_exterior_integral_against_half_plane_closed_form(s):
    # {y2 <= -1} lies entirely beyond the box [-1,1]^2; its Riesz integral from x is
    # B(1/2, (1+s)/2) (x2 + 1)^-s / s.
    pts = np.array([[0.0, 0.0], [0.3, -0.5], [-0.7, 0.6]])
    ins, tot, _, _ = exterior_integral(pts, -1.0, 1.0, HalfSpace.lower(2, -1.0), riesz_upper_tail(s), 1024)
    exact = special.beta(0.5, (1 + s) / 2) * (pts[:, 1] + 1.0) ** (-s) / s
    assert np.allclose(ins[:, 0], exact, rtol=2e-3)


@pytest.mark.parametrize("s", [0.2, 0.6])
def test_exterior_total_in_1d_is_exact(s):
    x = np.array([[-0.3], [0.0], [0.8]])
    _, tot, _, _ = exterior_integral(x, -1.0, 1.0, Nothing(1), riesz_upper_tail(s))
    exact = ((x[:, 0] + 1) ** (-s) + (1 - x[:, 0]) ** (-s)) / s
    assert np.allclose(tot[:, 0], exact, rtol=1e-12)
