"""A small, fast suite of self-checks used by the ``verify`` command.

Every check returns records ``{check, value, tolerance, pass}``. The sizes
are kept small so that the whole suite runs in well under a minute; the
full-size versions live in the test suite.
"""

from __future__ import annotations

import math

import numpy as np

from .curvature import density_profile, nl_mean_curvature, unit_ball_volume, viscosity_sign_check
from .energy import brute_cut_energy, fft_cut_energy, minimality_identity
from .extension import cone_curve, product_consistency
from .flow import build_flow_kernel, mbo_step
from .grid import FREE, Grid, PhaseField, boundary_cells
from .kernel import FractionalOrder, build_table
from .mincut import assemble, certify_minimizer, enumerate_minimum, solve_cut, solve_exact
from .sets import Ball, HalfSpace, Intervals


def record(check: str, value: float, tolerance: float, ok: bool) -> dict:
    return {"check": check, "value": float(value), "tolerance": float(tolerance), "pass": bool(ok)}


def _random_field(rng, dim, side, free_prob=0.5):
    g = Grid.box([-1.0] * dim, [1.0] * dim, 2.0 / side)
    region = rng.random(g.shape) < free_prob
    inside = rng.random(g.shape) < 0.5
    ext = HalfSpace(rng.normal(size=dim), rng.uniform(-0.5, 0.5))
    return PhaseField(g, np.where(inside, 1, 0).astype(np.int8), region, ext)


def check_minimality_identity(rng, instances=40):
    worst = 0.0
    for k in range(instances):
        dim = 1 + k % 2
        E = _random_field(rng, dim, (64, 12)[dim - 1])
        K = build_table(E.grid, FractionalOrder(rng.uniform(0.1, 0.9)))
        F = E.with_inside(np.where(E.region, rng.random(E.grid.shape) < 0.5, E.inside))
        lhs, rhs = minimality_identity(E, F, K)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return [record("minimality_identity", worst, 1e-10, worst <= 1e-10)]


def check_exact_vs_enumeration(rng, instances=20):
    worst = 0.0
    for k in range(instances):
        dim = 1 + k % 2
        side = (24, 6)[dim - 1]
        g = Grid.box([-1.0] * dim, [1.0] * dim, 2.0 / side)
        region = np.zeros(g.n_cells, dtype=bool)
        region[rng.choice(g.n_cells, size=int(rng.integers(1, 13)), replace=False)] = True
        region = region.reshape(g.shape)
        inside = rng.random(g.shape) < 0.5
        labels = np.where(region, FREE, np.where(inside, 1, 0)).astype(np.int8)
        f = PhaseField(g, labels, region, HalfSpace(rng.normal(size=dim), 0.0))
        p = assemble(f, build_table(g, FractionalOrder(rng.uniform(0.1, 0.9))))
        sol = solve_cut(p)
        _, best = enumerate_minimum(p)
        worst = max(worst, abs(p.energy(sol.labels) - best) / max(abs(best), 1e-300))
    return [record("exact_vs_enumeration", worst, 1e-9, worst <= 1e-9)]


def check_hyperplane(orders=(0.3, 0.5, 0.7), side=32):
    out = []
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], 2.0 / side)
    for s in orders:
        shape = HalfSpace.lower(2)
        data = PhaseField.from_shape(g, shape, np.ones(g.shape, dtype=bool))
        sol = solve_exact(assemble(data, build_table(g, FractionalOrder(s))))
        bad = int((sol.inside != g.rasterize(shape)).sum())
        out.append(record(f"hyperplane_minimality_s{s}", bad, 0, bad == 0))
    return out


def check_pv_closed_form(h=1 / 256):
    g = Grid.box([-2.0], [2.0], h)
    f = PhaseField.from_shape(g, Intervals([(-1.0, 1.0)]), free=False)
    K = build_table(g, FractionalOrder(0.5))
    x0 = np.array([1.0 - h / 2])
    value = nl_mean_curvature(f, x0, K, 3 * h).value
    rel = abs(value + 2 * math.sqrt(2)) / (2 * math.sqrt(2))
    return [record("pv_closed_form_1d", rel, 0.02, rel <= 0.02)]


def _disk_minimizer(s=0.5, side=48):
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], 2.0 / side)
    region = (g.centers() ** 2).sum(axis=-1) < 0.6**2
    data = PhaseField.from_shape(g, HalfSpace([0.3, 1.0], 0.1), region)
    K = build_table(g, FractionalOrder(s))
    return solve_exact(assemble(data, K)), K


def check_regularity():
    field, K = _disk_minimizer()
    ok, margin = certify_minimizer(field, K)
    out = [record("certified_minimizer", margin, 0.0, ok)]
    rep = viscosity_sign_check(field, K, 3 * field.grid.h, mask=field.region)
    out.append(record("euler_lagrange_sign", len(rep.violations), 0, rep.ok))
    g = field.grid
    ratio = math.inf
    for p in np.argwhere(boundary_cells(field).mask & field.region):
        x = g.center(p)
        room = float(min((x - g.lo).min(), (g.hi - x).min()))
        radii = [r for r in np.arange(4, 13) * g.h if r <= room]
        ratio = min([ratio] + [v for _, v in density_profile(field, x, radii)])
    floor = 0.05 * unit_ball_volume(2)
    out.append(record("density_estimate", ratio, floor, ratio >= floor))
    return out


def check_phi_constancy(h=1 / 32):
    c = cone_curve(math.pi, FractionalOrder(0.5), [0.25, 0.5], h)
    rel = abs(c.values[0] - c.values[1]) / abs(c.values[1])
    return [record("phi_constancy_halfplane", rel, 0.03, rel <= 0.03)]


def check_mbo_halfplane(side=64, steps=50):
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], 2.0 / side)
    shape = HalfSpace([0.0, 1.0], 0.0)
    f = PhaseField.from_shape(g, shape, np.ones(g.shape, dtype=bool), free=False)
    k = build_flow_kernel(g, FractionalOrder(0.5), 0.1)
    start = f.inside.copy()
    for _ in range(steps):
        f = mbo_step(f, k)
    bad = int((f.inside != start).sum())
    return [record("mbo_halfplane_invariance", bad, 0, bad == 0)]


def check_fft(rng, fields=5, side=32):
    g = Grid.box([-1.0, -1.0], [1.0, 1.0], 2.0 / side)
    K = build_table(g, FractionalOrder(0.5))
    worst = 0.0
    for _ in range(fields):
        f = PhaseField(g, (rng.random(g.shape) < 0.5).astype(np.int8), np.zeros(g.shape, dtype=bool))
        a, b = fft_cut_energy(f, K), brute_cut_energy(f, K)
        worst = max(worst, abs(a - b) / abs(b))
    return [record("fft_matches_brute", worst, 1e-8, worst <= 1e-8)]


def check_product(h=1 / 16):
    g1 = Grid.box([-1.0], [1.0], h)
    region = np.abs(g1.centers()[:, 0]) < 0.5
    data = PhaseField.from_shape(g1, Intervals([(-5.0, -0.5), (0.55, 0.75), (0.9, 1.5)]), region)
    order = FractionalOrder(0.5)
    field1d = solve_exact(assemble(data, build_table(g1, order)))
    rep = product_consistency(field1d, order)
    return [record("product_consistency", rep.mismatched_cells, 0, rep.match and rep.certified_2d)]


CHECKS = {
    "minimality_identity": lambda rng: check_minimality_identity(rng),
    "exact_vs_enumeration": lambda rng: check_exact_vs_enumeration(rng),
    "hyperplane_minimality": lambda rng: check_hyperplane(),
    "pv_closed_form": lambda rng: check_pv_closed_form(),
    "regularity": lambda rng: check_regularity(),
    "phi_constancy": lambda rng: check_phi_constancy(),
    "mbo_halfplane": lambda rng: check_mbo_halfplane(),
    "fft_matches_brute": lambda rng: check_fft(rng),
    "product_consistency": lambda rng: check_product(),
}


def run_suite(names=None, seed: int = 0):
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}")
    rng = np.random.default_rng(seed)
    out = []
    for name in names:
        out.extend(CHECKS[name](rng))
    return out
