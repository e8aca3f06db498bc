import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracmin.grid import (
    FREE,
    IN,
    OUT,
    CellSet,
    Grid,
    GridError,
    PhaseField,
    boundary_cells,
    cells_in_ball,
    measure,
)
from fracmin.sets import Ball, HalfSpace


def centers_of(cells):
    return sorted(cells.grid.centers()[cells.mask].ravel().tolist())


def test_grid_validation():
    with pytest.raises(GridError):
        Grid((0.0,), (0,), 1.0)
    with pytest.raises(GridError):
        Grid((0.0,), (4,), -1.0)
    with pytest.raises(GridError):
        Grid((0.0, 0.0, 0.0, 0.0), (2, 2, 2, 2), 1.0)
    with pytest.raises(GridError):
        Grid.box([0.0], [1.0], 0.3)


def test_half_open_cells_and_locate():
    g = Grid((0.0,), (4,), 1.0)
    assert g.locate([1.0]) == (1,)
    assert g.locate([0.999]) == (0,)
    assert np.allclose(g.centers()[:, 0], [0.5, 1.5, 2.5, 3.5])


def test_ball_smaller_than_half_spacing_is_empty():
    g = Grid((0.0,), (4,), 1.0)
    assert len(cells_in_ball(g, [2.0], 0.4)) == 0


def test_ball_symmetric_inclusion():
    g = Grid((0.0,), (4,), 1.0)
    assert centers_of(cells_in_ball(g, [2.0], 1.0)) == [1.5, 2.5]


def test_ball_area_matches_disk():
    g = Grid.box([0.0, 0.0], [10.0, 10.0], 0.1)
    area = measure(cells_in_ball(g, [5.0, 5.0], 2.0))
    assert abs(area - 4 * math.pi) / (4 * math.pi) < 0.02


def test_measure_examples():
    g = Grid((0.0,), (10,), 0.5)
    assert measure(CellSet(g, np.zeros(10, bool))) == 0.0
    assert measure(CellSet(g, np.ones(10, bool))) == 5.0
    g2 = Grid((0.0, 0.0), (5, 5), 0.2)
    mask = np.zeros((5, 5), bool)
    mask[1, 2] = mask[3, 3] = mask[0, 0] = True
    assert measure(CellSet(g2, mask)) == pytest.approx(3 * 0.04, rel=1e-15)


def test_boundary_cells_examples():
    g = Grid.box([-2.0], [2.0], 1.0)
    f = PhaseField.from_shape(g, HalfSpace([1.0], 0.0))
    assert centers_of(boundary_cells(f)) == [-0.5, 0.5]
    full = PhaseField(g, np.full(4, IN, np.int8), np.zeros(4, bool))
    assert len(boundary_cells(full)) == 0


def test_boundary_of_disk_tracks_perimeter():
    g = Grid.box([-1.5, -1.5], [1.5, 1.5], 0.05)
    f = PhaseField.from_shape(g, Ball([0.0, 0.0], 1.0))
    # the two layers straddling the circle count once each; halve for the length
    length = len(boundary_cells(f)) * g.h / 2
    assert abs(length - 2 * math.pi) / (2 * math.pi) < 0.2


def test_boundary_requires_resolved():
    g = Grid((0.0,), (4,), 1.0)
    f = PhaseField(g, np.array([IN, FREE, OUT, OUT], np.int8), np.array([False, True, False, False]))
    with pytest.raises(GridError):
        boundary_cells(f)


def test_phase_field_rejects_free_outside_region():
    g = Grid((0.0,), (3,), 1.0)
    with pytest.raises(GridError):
        PhaseField(g, np.array([FREE, IN, OUT], np.int8), np.zeros(3, bool))


def test_with_inside_keeps_fixed_cells():
    g = Grid((0.0,), (4,), 1.0)
    f = PhaseField(g, np.array([IN, FREE, FREE, OUT], np.int8), np.array([False, True, True, False]))
    r = f.with_inside(np.array([False, True, False, True]))
    assert r.resolved
    assert r.labels.tolist() == [IN, IN, OUT, OUT]


masks = st.integers(1, 6).flatmap(
    lambda n: st.tuples(
        st.lists(st.booleans(), min_size=n * n, max_size=n * n),
        st.lists(st.booleans(), min_size=n * n, max_size=n * n),
    ).map(lambda ab: (n, ab))
)


@given(masks)
def test_cellset_algebra(data):
    n, (a, b) = data
    g = Grid((0.0, 0.0), (n, n), 0.25)
    A = CellSet(g, np.array(a).reshape(n, n))
    B = CellSet(g, np.array(b).reshape(n, n))
    assert A.complement().complement() == A
    assert measure(A | B) + measure(A & B) == pytest.approx(measure(A) + measure(B), abs=1e-15)
    assert (A - B).issubset(A)


@given(st.floats(0.01, 2.0), st.floats(0.0, 1.0), st.floats(-1, 1), st.floats(-1, 1))
def test_ball_monotone_in_radius(r1, extra, cx, cy):
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], 0.125)
    small = cells_in_ball(g, [cx, cy], r1)
    large = cells_in_ball(g, [cx, cy], r1 + extra)
    assert small.issubset(large)
