"""Command-line front end: ``fracmin <command> --config FILE [--threads N] [--out DIR]``.

Every run writes ``report.json``, a list of ``{check, value, tolerance,
pass}`` records, next to the command's own artifacts. Exit status: 0 when
all checks pass, 1 when one fails or an internal error occurs, 2 for an
invalid configuration, 3 when a resource cap is exceeded.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from .config import COMMANDS, ConfigError, RunConfig, load_config
from .curvature import (
    CurvatureSample,
    curvature_field,
    calibrate_pv_constant,
    nl_mean_curvature,
    viscosity_sign_check,
    write_samples_csv,
)
from .energy import fft_cut_energy, brute_cut_energy, local_energy
from .extension import ConeConstancyError, cone_curve, phi, product_consistency
from .flow import build_flow_kernel, extinction_step, run_flow, write_traces_csv
from .grid import GridError, boundary_cells
from .io import write_mask_text, write_pgm
from .kernel import FractionalOrder, build_table
from .mincut import CapacityError, assemble, certify_minimizer, local_search, solve_cut
from .verify import record, run_suite

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_CAP = 0, 1, 2, 3
_BRUTE_LIMIT = 4096


def format_json(obj, indent: int = 0) -> str:
    """JSON with every float printed to 17 significant digits."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}{format_json(str(k))}: {format_json(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [inner + format_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return '"NaN"'
        if math.isinf(v):
            return '"Infinity"' if v > 0 else '"-Infinity"'
        return "%.17g" % v
    if obj is None:
        return "null"
    import json

    return json.dumps(str(obj), ensure_ascii=False)


def _write_json(path: Path, obj):
    path.write_text(format_json(obj) + "\n")


def _write_mask(mask, path_stem: Path):
    if mask.ndim == 2:
        write_pgm(mask, path_stem.with_suffix(".pgm"))
    else:
        write_mask_text(mask, path_stem.with_suffix(".txt"))


def _minimize(cfg: RunConfig, K):
    p = assemble(cfg.field(), K, cfg.cutoff)
    sol = solve_cut(p)
    return p.to_field(sol.labels), sol


def cmd_energy(cfg: RunConfig, out: Path):
    field = cfg.field(resolved=True)
    K = build_table(field.grid, FractionalOrder(cfg.s))
    rep = local_energy(field, K)
    data = rep.to_dict()
    checks = [
        record("L_terms_nonnegative", min(rep.L_terms.values()), 0.0, min(rep.L_terms.values()) >= 0.0),
    ]
    total = sum(rep.L_terms.values()) + rep.tail_term
    checks.append(record("J_equals_sum_of_terms", abs(total - rep.J_value), 1e-12 * abs(total), abs(total - rep.J_value) <= 1e-12 * abs(total)))
    if field.grid.n_cells <= _BRUTE_LIMIT:
        a, b = fft_cut_energy(field, K), brute_cut_energy(field, K)
        rel = abs(a - b) / max(abs(b), 1e-300)
        checks.append(record("fft_matches_brute", rel, 1e-8, rel <= 1e-8))
        data["box_cut_energy"] = a
    _write_json(out / "energy.json", data)
    return checks


def cmd_minimize(cfg: RunConfig, out: Path):
    K = build_table(cfg.grid(), FractionalOrder(cfg.s))
    field, sol = _minimize(cfg, K)
    ok, margin = certify_minimizer(field, K, cfg.cutoff)
    greedy = local_search(cfg.field(), K, seed=cfg.seed, cutoff=cfg.cutoff)
    p = assemble(cfg.field(), K, cfg.cutoff)
    e_greedy = p.energy(p.labels_of(greedy))
    _write_mask(field.inside, out / "minimizer")
    _write_json(
        out / "minimize.json",
        {
            "energy": sol.energy,
            "rounding_bound": sol.rounding_bound,
            "free_cells": int(field.region.sum()),
            "local_search_energy": e_greedy,
        },
    )
    return [
        record("flip_stable", margin, 0.0, ok),
        record("exact_not_above_local_search", sol.energy - e_greedy, sol.rounding_bound, sol.energy <= e_greedy + sol.rounding_bound),
    ]


def cmd_curvature(cfg: RunConfig, out: Path):
    K = build_table(cfg.grid(), FractionalOrder(cfg.s))
    field = _minimize(cfg, K)[0] if cfg.minimize else cfg.field(resolved=True)
    grid = field.grid
    delta = 3 * grid.h if cfg.delta is None else cfg.delta
    C = calibrate_pv_constant(K, delta)
    samples = []
    if cfg.points is not None:
        samples = [nl_mean_curvature(field, p, K, delta, pv_constant=C) for p in cfg.points]
    else:
        mask = boundary_cells(field).mask
        vals, errs = curvature_field(field, K, delta, mask)
        for idx in np.argwhere(mask):
            i = tuple(idx)
            samples.append(CurvatureSample(grid.center(idx), float(vals[i]), delta, C * delta ** (1 - K.s), float(errs[i])))
    write_samples_csv(samples, out / "curvature.csv")
    finite = all(math.isfinite(smp.value) for smp in samples)
    checks = [record("curvature_finite", len(samples), 0, finite)]
    if cfg.minimize:
        rep = viscosity_sign_check(field, K, delta, mask=field.region)
        checks.append(record("euler_lagrange_sign", len(rep.violations), 0, rep.ok))
    return checks


def cmd_flow(cfg: RunConfig, out: Path):
    field = cfg.field(resolved=True)
    grid = field.grid
    order = FractionalOrder(cfg.s)
    t = cfg.t if cfg.t is not None else (1.5 * grid.h) ** order.s
    kernel = build_flow_kernel(grid, order, t)
    frames = out / "frames"
    if cfg.frame_every:
        frames.mkdir(exist_ok=True)

    def dump(step, f):
        _write_mask(f.inside, frames / f"frame_{step:05d}")

    traces, final = run_flow(field, kernel, cfg.steps, cfg.frame_every, dump)
    write_traces_csv(traces, out / "flow.csv")
    _write_mask(final.inside, out / "final")
    ext = extinction_step(traces)
    _write_json(out / "flow.json", {"t": t, "steps": traces[-1].step, "extinction_step": ext, "degenerate_kernel": kernel.degenerate})
    return [record("kernel_resolved", int(kernel.degenerate), 0, not kernel.degenerate)]


def cmd_phi(cfg: RunConfig, out: Path):
    if not cfg.radii:
        raise ConfigError("'phi' needs 'radii'")
    order = FractionalOrder(cfg.s)
    if cfg.minimize:
        field = _minimize(cfg, build_table(cfg.grid(), order))[0]
    else:
        field = cfg.field(resolved=True)
    curve = phi(field, cfg.radii, order, center=cfg.center)
    curve.write_csv(out / "phi.csv")
    checks = [record("phi_nonnegative", float(curve.values.min()), 0.0, bool(np.all(curve.values >= 0)))]
    if cfg.minimize:
        drops = [
            (curve.values[k] - curve.values[k + 1]) - (curve.discretization_error[k] + curve.discretization_error[k + 1])
            for k in range(len(curve.values) - 1)
        ]
        worst = max(drops) if drops else -math.inf
        checks.append(record("phi_monotone_within_error", worst, 0.0, worst <= 0.0))
    return checks


def cmd_cones(cfg: RunConfig, out: Path):
    if cfg.dim != 2:
        raise ConfigError("'cones' is planar; set dim: 2")
    order = FractionalOrder(cfg.s)
    radii = [cfg.r_eval / 2, cfg.r_eval]
    half = float(max(cfg.hi.max(), -cfg.lo.min()))
    plane = cone_curve(math.pi, order, radii, cfg.h, half)
    rows = []
    checks = []
    for opening in cfg.openings or [math.pi / 2]:
        c = cone_curve(opening, order, radii, cfg.h, half)
        spread = abs(c.values[0] - c.values[1])
        const_ok = spread <= 0.03 * abs(c.values[1]) + c.discretization_error.sum()
        gap = c.values[1] - plane.values[1]
        err = c.discretization_error[1] + plane.discretization_error[1]
        rows.append((opening, c.values[1], plane.values[1], gap, err))
        checks.append(record(f"cone_constancy_{opening:.6f}", spread / abs(c.values[1]), 0.03, const_ok))
        if abs(opening - math.pi) > 1e-12:
            checks.append(record(f"energy_gap_{opening:.6f}", gap, err, gap > err))
    with open(out / "cones.csv", "w") as fh:
        fh.write("opening,phi,phi_halfplane,gap,err\n")
        for row in rows:
            fh.write(",".join("%.17g" % v for v in row) + "\n")
    return checks


def cmd_product(cfg: RunConfig, out: Path):
    if cfg.dim != 1:
        raise ConfigError("'product' takes a 1D configuration; set dim: 1")
    order = FractionalOrder(cfg.s)
    field1d = _minimize(cfg, build_table(cfg.grid(), order))[0]
    rep = product_consistency(field1d, order)
    _write_mask(field1d.inside, out / "minimizer_1d")
    _write_mask(rep.field2d.inside, out / "minimizer_2d")
    _write_json(out / "product.json", {"match": rep.match, "mismatched_cells": rep.mismatched_cells})
    return [
        record("certified_1d", 0, 0, rep.certified_1d),
        record("certified_2d", 0, 0, rep.certified_2d),
        record("product_cylinder_match", rep.mismatched_cells, 0, rep.match),
    ]


def cmd_verify(cfg: RunConfig, out: Path):
    try:
        return run_suite(cfg.checks, cfg.seed)
    except KeyError as err:
        raise ConfigError(str(err.args[0])) from None


HANDLERS = {
    "energy": cmd_energy,
    "minimize": cmd_minimize,
    "curvature": cmd_curvature,
    "flow": cmd_flow,
    "phi": cmd_phi,
    "cones": cmd_cones,
    "product": cmd_product,
    "verify": cmd_verify,
}


def bundled_config(name: str = "small_suite.yaml") -> Path:
    return Path(str(resources.files("fracmin") / "data" / name))


@contextlib.contextmanager
def _thread_cap(n):
    if n is None:
        yield
        return
    import numba

    previous = numba.get_num_threads()
    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    try:
        with sfft.set_workers(n):
            yield
    finally:
        numba.set_num_threads(previous)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracmin", description="Nonlocal minimal surfaces on grids.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML or JSON run configuration (verify defaults to the bundled suite)")
    ap.add_argument("--threads", type=int, default=None, help="worker cap for FFTs and max-flow")
    ap.add_argument("--out", default=".", help="output directory (created if missing)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.config is None:
            if args.command != "verify":
                raise ConfigError(f"'{args.command}' needs --config")
            config_path = bundled_config()
        else:
            config_path = Path(args.config)
        cfg = load_config(config_path, args.command)
        out.mkdir(parents=True, exist_ok=True)
        with _thread_cap(args.threads):
            checks = HANDLERS[cfg.command](cfg, out)
    except ConfigError as err:
        print(f"fracmin: configuration error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except (CapacityError, MemoryError) as err:
        print(f"fracmin: resource cap exceeded: {err}", file=sys.stderr)
        return EXIT_CAP
    except (GridError, ConeConstancyError, AssertionError, ValueError, RuntimeError) as err:
        print(f"fracmin: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_FAIL
    _write_json(out / "report.json", checks)
    failed = [c["check"] for c in checks if not c["pass"]]
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['check']}  value={c['value']:.6g}  tol={c['tolerance']:.6g}")
    if failed:
        print(f"fracmin: {len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
