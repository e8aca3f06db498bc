"""Run configuration: a YAML or JSON mapping validated into :class:`RunConfig`.

Keys
----
command      one of ``COMMANDS`` (the command line may supply it instead)
s            fractional order in (0, 1)
dim          1, 2 or 3
box          ``{lo: [...], hi: [...]}`` or a half-width ``L`` for ``[-L, L]^dim``
h            cell side; every box side must be a multiple of it
set          prescribed set (below); fills the box and continues beyond it
region       free region (below); default: none
cutoff       pair cutoff radius for the cut problem (default: none, dense)
seed         random seed (default 0)
delta        curvature excision radius (default 3h)
points       curvature sample points (default: every boundary cell)
minimize     solve for the minimizer before measuring (curvature, phi)
radii        Phi radii, increasing
center       Phi center (default: origin)
t, steps     flow kernel time and step cap
frame_every  flow frames written every that many steps (0: none)
openings     cone openings for ``cones``; ``r_eval`` their radius
checks       names of the ``verify`` checks to run (default: all)

Sets are mappings with a ``type``: ``nothing``, ``everything``,
``halfplane`` (``normal``, ``offset``: ``{x . normal <= offset}``),
``wedge`` (``opening``, ``bisector``), ``sectors`` (``sectors: [[bisector,
opening], ...]``), ``ball`` (``center``, ``radius``), ``interval``
(``intervals: [[a, b], ...]``), ``complement`` (``of``) and ``mask``
(``path`` to a PGM or 0/1 text file over the box, ``outside`` the set beyond
it). Regions are ``all``, ``none``, ``{type: ball, ...}``, ``{type: box, lo,
hi}`` or ``{type: mask, path}``. Angles are numbers in radians or strings
such as ``pi/2`` or ``3*pi/4``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any

import numpy as np

from .grid import Grid, GridError, PhaseField
from .io import read_mask_text, read_pgm
from .sets import Ball, Complement, Everything, HalfSpace, Intervals, Nothing, Sectors

COMMANDS = ("energy", "minimize", "curvature", "flow", "phi", "cones", "product", "verify")
DEFAULT_SEED = 0
_KEYS = {
    "command", "s", "dim", "box", "h", "set", "region", "cutoff", "seed", "delta", "points",
    "minimize", "radii", "center", "t", "steps", "frame_every", "openings", "r_eval", "checks",
}


class ConfigError(ValueError):
    """The configuration does not satisfy the schema."""


def parse_angle(value) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = re.fullmatch(r"\s*([0-9.]*)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?\s*", value)
        if m:
            num = float(m.group(1)) if m.group(1) else 1.0
            den = float(m.group(2)) if m.group(2) else 1.0
            return num * math.pi / den
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"cannot read angle {value!r}")


def _real(cfg, key, default=None, lo=None, hi=None, open_lo=False, open_hi=False):
    if key not in cfg or cfg[key] is None:
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return default
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"'{key}' must be finite")
    if lo is not None and (v < lo or (open_lo and v == lo)):
        raise ConfigError(f"'{key}' = {v} violates the lower bound {'>' if open_lo else '>='} {lo}")
    if hi is not None and (v > hi or (open_hi and v == hi)):
        raise ConfigError(f"'{key}' = {v} violates the upper bound {'<' if open_hi else '<='} {hi}")
    return v


def _vector(v, dim, key):
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.shape != (dim,) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"'{key}' must be a list of {dim} numbers, got {v!r}")
    return arr


@dataclass
class RunConfig:
    command: str
    s: float
    dim: int
    lo: np.ndarray
    hi: np.ndarray
    h: float
    set_spec: Any = "nothing"
    region_spec: Any = "none"
    cutoff: float | None = None
    seed: int = DEFAULT_SEED
    delta: float | None = None
    points: list | None = None
    minimize: bool = False
    radii: list = dc_field(default_factory=list)
    center: np.ndarray | None = None
    t: float | None = None
    steps: int = 100
    frame_every: int = 0
    openings: list = dc_field(default_factory=list)
    r_eval: float = 0.5
    checks: list | None = None
    base_dir: Path = Path(".")

    def grid(self) -> Grid:
        try:
            return Grid.box(self.lo, self.hi, self.h)
        except GridError as err:
            raise ConfigError(str(err)) from None

    def shape(self, spec=None, dim=None):
        return build_shape(self.set_spec if spec is None else spec, self.dim if dim is None else dim, self.base_dir)

    def field(self, resolved: bool = False) -> PhaseField:
        """Prescribed set over the box; free-region cells are FREE unless ``resolved``."""
        grid = self.grid()
        region = build_region(self.region_spec, grid, self.base_dir)
        spec = self.set_spec
        if isinstance(spec, dict) and spec.get("type") == "mask":
            inside = _read_mask(spec, grid, self.base_dir)
            outside = build_shape(spec.get("outside", "nothing"), self.dim, self.base_dir)
        else:
            outside = self.shape()
            inside = grid.rasterize(outside)
        labels = np.where(inside, 1, 0).astype(np.int8)
        if not resolved:
            labels[region] = -1
        return PhaseField(grid, labels, region, outside)


def _read_mask(spec, grid, base_dir):
    path = spec.get("path")
    if not isinstance(path, str):
        raise ConfigError("mask needs a 'path'")
    p = Path(path)
    if not p.is_absolute():
        p = base_dir / p
    if not p.exists():
        raise ConfigError(f"mask file {p} not found")
    mask = read_pgm(p) if p.suffix.lower() == ".pgm" else read_mask_text(p)
    if mask.shape != grid.shape:
        raise ConfigError(f"mask shape {mask.shape} differs from the grid {grid.shape}")
    return mask


def build_shape(spec, dim: int, base_dir: Path = Path(".")):
    if isinstance(spec, str):
        spec = {"type": spec}
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"set spec must be a mapping with a 'type', got {spec!r}")
    kind = spec["type"]
    try:
        if kind == "nothing":
            return Nothing(dim)
        if kind == "everything":
            return Everything(dim)
        if kind == "halfplane":
            normal = np.zeros(dim)
            normal[-1] = 1.0
            if "normal" in spec:
                normal = _vector(spec["normal"], dim, "normal")
                if not np.any(normal):
                    raise ConfigError("halfplane normal must be nonzero")
            return HalfSpace(normal, float(spec.get("offset", 0.0)))
        if kind in ("wedge", "sectors"):
            if dim != 2:
                raise ConfigError(f"{kind} sets are planar, dim is {dim}")
            if kind == "wedge":
                if "opening" not in spec:
                    raise ConfigError("wedge needs an 'opening'")
                pairs = [(parse_angle(spec.get("bisector", -math.pi / 2)), parse_angle(spec["opening"]))]
            else:
                pairs = [(parse_angle(b), parse_angle(o)) for b, o in spec["sectors"]]
            for _, o in pairs:
                if not 0 < o < 2 * math.pi:
                    raise ConfigError(f"sector opening {o} outside (0, 2*pi)")
            return Sectors(pairs)
        if kind == "ball":
            center = _vector(spec.get("center", [0.0] * dim), dim, "center")
            radius = float(spec["radius"])
            if not radius > 0:
                raise ConfigError(f"ball radius must be positive, got {radius}")
            return Ball(center, radius)
        if kind == "interval":
            if dim != 1:
                raise ConfigError(f"interval sets are 1D, dim is {dim}")
            ivs = [(float(a), float(b)) for a, b in spec["intervals"]]
            if any(b < a for a, b in ivs):
                raise ConfigError("interval ends must satisfy a <= b")
            return Intervals(ivs)
        if kind == "complement":
            return Complement(build_shape(spec["of"], dim, base_dir))
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"bad '{kind}' set spec: {err}") from None
    raise ConfigError(f"unknown set type {kind!r}")


def build_region(spec, grid: Grid, base_dir: Path = Path(".")) -> np.ndarray:
    if spec is None or spec == "none":
        return np.zeros(grid.shape, dtype=bool)
    if spec == "all":
        return np.ones(grid.shape, dtype=bool)
    if isinstance(spec, dict):
        kind = spec.get("type")
        if kind == "mask":
            return _read_mask(spec, grid, base_dir)
        if kind == "box":
            lo = _vector(spec["lo"], grid.dim, "lo")
            hi = _vector(spec["hi"], grid.dim, "hi")
            c = grid.centers()
            return np.all((c > lo) & (c < hi), axis=-1)
        if kind in ("ball", "halfplane", "wedge", "sectors", "interval", "complement", "everything", "nothing"):
            return grid.rasterize(build_shape(spec, grid.dim, base_dir))
    raise ConfigError(f"cannot read region {spec!r}")


def load_config(path, command: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    if path.suffix.lower() == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from None
    else:
        import yaml

        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as err:
            raise ConfigError(f"{path}: {err}") from None
    return parse_config(raw, command, path.parent)


def parse_config(raw, command: str | None = None, base_dir: Path = Path(".")) -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = sorted(set(raw) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    cmd = raw.get("command")
    if command is not None:
        if cmd is not None and cmd != command:
            raise ConfigError(f"config is for '{cmd}', command line asks for '{command}'")
        cmd = command
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}, got {cmd!r}")
    if cmd == "verify":
        checks = raw.get("checks")
        if checks is not None and (not isinstance(checks, list) or not all(isinstance(c, str) for c in checks)):
            raise ConfigError("'checks' must be a list of names")
        seed = raw.get("seed", DEFAULT_SEED)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"'seed' must be a nonnegative integer, got {seed!r}")
        return RunConfig(cmd, 0.5, 2, np.zeros(2), np.ones(2), 1.0, seed=seed, checks=checks, base_dir=base_dir)
    s = _real(raw, "s", lo=0.0, hi=1.0, open_lo=True, open_hi=True)
    dim = raw.get("dim")
    if dim not in (1, 2, 3):
        raise ConfigError(f"'dim' must be 1, 2 or 3, got {dim!r}")
    h = _real(raw, "h", lo=0.0, open_lo=True)
    box = raw.get("box", 1.0)
    if isinstance(box, (int, float)) and not isinstance(box, bool):
        if not box > 0:
            raise ConfigError("box half-width must be positive")
        lo, hi = np.full(dim, -float(box)), np.full(dim, float(box))
    elif isinstance(box, dict) and "lo" in box and "hi" in box:
        lo, hi = _vector(box["lo"], dim, "box.lo"), _vector(box["hi"], dim, "box.hi")
        if np.any(hi <= lo):
            raise ConfigError("box needs lo < hi on every axis")
    else:
        raise ConfigError(f"cannot read box {box!r}")
    cfg = RunConfig(cmd, s, dim, lo, hi, h, raw.get("set", "nothing"), raw.get("region", "none"), base_dir=base_dir)
    if raw.get("cutoff") is not None:
        cfg.cutoff = _real(raw, "cutoff", lo=0.0, open_lo=True)
    seed = raw.get("seed", DEFAULT_SEED)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"'seed' must be a nonnegative integer, got {seed!r}")
    cfg.seed = seed
    if raw.get("delta") is not None:
        cfg.delta = _real(raw, "delta", lo=2 * h)
    if raw.get("points") is not None:
        cfg.points = [_vector(p, dim, "points") for p in raw["points"]]
    cfg.minimize = bool(raw.get("minimize", False))
    if "radii" in raw:
        radii = [float(r) for r in raw["radii"]]
        if not radii or any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ConfigError("'radii' must be positive and strictly increasing")
        cfg.radii = radii
    if raw.get("center") is not None:
        cfg.center = _vector(raw["center"], dim, "center")
    if raw.get("t") is not None:
        cfg.t = _real(raw, "t", lo=0.0, open_lo=True)
    if "steps" in raw:
        steps = raw["steps"]
        if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
            raise ConfigError(f"'steps' must be a positive integer, got {steps!r}")
        cfg.steps = steps
    if "frame_every" in raw:
        fe = raw["frame_every"]
        if isinstance(fe, bool) or not isinstance(fe, int) or fe < 0:
            raise ConfigError(f"'frame_every' must be a nonnegative integer, got {fe!r}")
        cfg.frame_every = fe
    if "openings" in raw:
        cfg.openings = [parse_angle(o) for o in raw["openings"]]
        if any(not 0 < o < 2 * math.pi for o in cfg.openings):
            raise ConfigError("cone openings must lie in (0, 2*pi)")
    if "r_eval" in raw:
        cfg.r_eval = _real(raw, "r_eval", lo=0.0, open_lo=True)
    # build once so that set and region errors surface as schema errors
    cfg.field()
    return cfg
