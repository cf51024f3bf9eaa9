"""Run configuration: YAML loading with line-precise validation, presets, initial data."""

from __future__ import annotations

import copy
import re
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .dynamics import FullState, Params, ReducedState, StepControl
from .grid import RadialGrid, build_grid, integrate_ball
from .initial_data import drive_to_class, make_bump, max_lp_exponent

MODES = ("full", "reduced", "compare")
INITIAL_KINDS = ("constant", "bump", "file")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    R: float = 1.0
    n: int = 3
    N: int = 128


@dataclass(frozen=True)
class InitialConfig:
    """Initial data recipe.

    ``constant``: u = m/|ball| times (1 + perturbation * random cosine mix
    drawn from the run seed). ``bump``: ``make_bump(m, sigma)``. ``file``: CSV
    with columns r,u,v,w on the configured grid. Chemicals default to the
    equilibrium values of the mean density unless ``v_level``/``w_level``
    set them. ``drive`` pushes the result into the blow-up class.
    """

    kind: str = "constant"
    sigma: float = 0.1
    perturbation: float = 0.0
    modes: int = 3
    v_level: float | None = None
    w_level: float | None = None
    path: str | None = None
    drive: bool = False
    drive_select: str = "first"


@dataclass(frozen=True)
class Thresholds:
    m: float = 1.0
    A: float = 10.0
    K: float = 1.0
    eps: float = 1.0
    p: float = 1.1


@dataclass(frozen=True)
class CompareConfig:
    dts: tuple[float, ...] = (1e-3, 5e-4, 2.5e-4)
    t_end: float = 0.05


@dataclass(frozen=True)
class SweepConfig:
    chi: tuple[float, ...] | None = None
    xi: tuple[float, ...] | None = None
    sigma: tuple[float, ...] | None = None
    m: tuple[float, ...] | None = None


@dataclass(frozen=True)
class RunConfig:
    params: Params = field(default_factory=Params)
    grid: GridConfig = field(default_factory=GridConfig)
    control: StepControl = field(default_factory=StepControl)
    initial: InitialConfig = field(default_factory=InitialConfig)
    mode: str = "full"
    thresholds: Thresholds = field(default_factory=Thresholds)
    output_dir: str = "out"
    seed: int = 0
    snapshot_every: int = 0
    compare: CompareConfig = field(default_factory=CompareConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def build_grid(self) -> RadialGrid:
        return build_grid(self.grid.R, self.grid.n, self.grid.N)


_SECTIONS = {
    "params": Params,
    "grid": GridConfig,
    "control": StepControl,
    "initial": InitialConfig,
    "thresholds": Thresholds,
    "compare": CompareConfig,
    "sweep": SweepConfig,
}
_SCALARS = {"mode": str, "output_dir": str, "seed": int, "snapshot_every": int}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _line_index(text: str) -> dict[tuple[str, ...], int]:
    """Map key paths of a YAML mapping document to 1-based line numbers."""
    index: dict[tuple[str, ...], int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return index

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                sub = path + (str(key.value),)
                index[sub] = key.start_mark.line + 1
                walk(value, sub)

    if root is not None:
        walk(root, ())
    return index


class _Locator:
    def __init__(self, source: str, lines: dict[tuple[str, ...], int]):
        self.source = source
        self.lines = lines

    def error(self, path: tuple[str, ...], message: str) -> ConfigError:
        for k in range(len(path), 0, -1):
            if path[:k] in self.lines:
                return ConfigError(f"{self.source}:{self.lines[path[:k]]}: {'.'.join(path)}: {message}")
        return ConfigError(f"{self.source}: {'.'.join(path) or '<root>'}: {message}")


def _coerce_section(cls, data: Any, path: tuple[str, ...], loc: _Locator):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise loc.error(path, f"expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise loc.error(path + (str(unknown[0]),), f"unknown key (allowed: {', '.join(sorted(names))})")
    floats = {f.name for f in dataclasses.fields(cls) if "float" in str(f.type)}
    kwargs = {}
    for key, value in data.items():
        if key in floats and isinstance(value, str):
            # PyYAML reads 1e-4 (no dot) as a string
            try:
                value = float(value)
            except ValueError:
                raise loc.error(path + (key,), f"expected a number, got {value!r}") from None
        if cls is SweepConfig or (cls is CompareConfig and key == "dts"):
            if value is not None and not isinstance(value, list):
                raise loc.error(path + (key,), "expected a list")
            try:
                value = tuple(float(v) for v in value) if value is not None else None
            except (TypeError, ValueError):
                raise loc.error(path + (key,), "expected a list of numbers") from None
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        bad = next((k for k in kwargs if k in str(exc)), None)
        raise loc.error(path + ((bad,) if bad else ()), str(exc)) from None


def config_from_dict(data: dict, source: str = "<config>", lines=None) -> RunConfig:
    loc = _Locator(source, lines or {})
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise loc.error((), "top level must be a mapping")
    unknown = sorted(set(data) - set(_SECTIONS) - set(_SCALARS))
    if unknown:
        raise loc.error((unknown[0],), "unknown key")
    kwargs: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _coerce_section(cls, data[name], (name,), loc)
    for name, typ in _SCALARS.items():
        if name in data:
            value = data[name]
            if typ is int and (isinstance(value, bool) or not isinstance(value, int)):
                raise loc.error((name,), f"expected an integer, got {value!r}")
            if typ is str and not isinstance(value, str):
                raise loc.error((name,), f"expected a string, got {value!r}")
            kwargs[name] = value
    cfg = RunConfig(**kwargs)
    validate(cfg, loc)
    return cfg


def validate(cfg: RunConfig, loc: _Locator | None = None) -> None:
    loc = loc or _Locator("<config>", {})
    if cfg.mode not in MODES:
        raise loc.error(("mode",), f"must be one of {', '.join(MODES)}")
    try:
        cfg.build_grid()
    except ValueError as exc:
        key = re.search(r"\b(R|n|N)=", str(exc))
        raise loc.error(("grid", key.group(1)) if key else ("grid",), str(exc)) from None
    if cfg.mode in ("reduced", "compare") and not cfg.params.reducible:
        raise loc.error(
            ("params", "delta"),
            f"mode={cfg.mode} needs beta == delta (got {cfg.params.beta}, {cfg.params.delta}); "
            "unequal decay rates admit no closed equation for chi v - xi w",
        )
    th = cfg.thresholds
    if not 1.0 < th.p < max_lp_exponent(cfg.grid.n):
        raise loc.error(("thresholds", "p"), f"p must lie in (1, {max_lp_exponent(cfg.grid.n):.4g}) for n={cfg.grid.n}")
    if not th.m > 0.0:
        raise loc.error(("thresholds", "m"), "mass must be positive")
    ini = cfg.initial
    if ini.kind not in INITIAL_KINDS:
        raise loc.error(("initial", "kind"), f"must be one of {', '.join(INITIAL_KINDS)}")
    if ini.kind == "file":
        if not ini.path:
            raise loc.error(("initial", "path"), "kind=file needs a path")
        if not Path(ini.path).is_file():
            raise loc.error(("initial", "path"), f"file not found: {ini.path}")
    if ini.kind == "bump" and not ini.sigma > 0.0:
        raise loc.error(("initial", "sigma"), "sigma must be positive")
    if not 0.0 <= ini.perturbation < 1.0:
        raise loc.error(("initial", "perturbation"), "perturbation must lie in [0, 1)")
    if cfg.snapshot_every < 0:
        raise loc.error(("snapshot_every",), "must be >= 0")
    if len(cfg.compare.dts) < 2 or any(not d > 0 for d in cfg.compare.dts):
        raise loc.error(("compare", "dts"), "need at least two positive step sizes")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    return config_from_dict(data, str(path), _line_index(text))


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


def replace(cfg: RunConfig, **sections) -> RunConfig:
    """Copy of ``cfg`` with nested fields overridden, e.g. ``params={"chi": 3}``."""
    updates = {}
    for name, value in sections.items():
        current = getattr(cfg, name)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            updates[name] = dataclasses.replace(current, **value)
        else:
            updates[name] = value
    return dataclasses.replace(cfg, **updates)


PRESETS: dict[str, dict] = {
    "steady": {
        "params": {"chi": 2.0, "xi": 1.0},
        "grid": {"R": 1.0, "n": 3, "N": 64},
        "control": {"t_end": 0.5, "dt_init": 1e-3, "dt_min": 1e-8, "dt_max": 1e-2},
        "initial": {"kind": "constant"},
        "thresholds": {"m": 2.0, "A": 10.0, "K": 1.0, "eps": 1.0, "p": 1.1},
    },
    "subcritical3d": {
        "params": {"chi": 2.0, "xi": 1.0},
        "grid": {"R": 1.0, "n": 3, "N": 256},
        "control": {"t_end": 1.0, "dt_init": 1e-4, "dt_min": 1e-8, "dt_max": 1e-2},
        "initial": {"kind": "constant", "perturbation": 0.3},
        "thresholds": {"m": 4.0, "A": 10.0, "K": 1.0, "eps": 1.0, "p": 1.1},
        "snapshot_every": 200,
    },
    "supercritical3d": {
        "params": {"chi": 2.0, "xi": 1.0},
        "grid": {"R": 1.0, "n": 3, "N": 512},
        "control": {"t_end": 5.0, "dt_init": 1e-6, "dt_min": 2e-8, "dt_max": 1e-2},
        "initial": {"kind": "constant", "v_level": 0.1, "w_level": 0.1, "drive": True},
        "thresholds": {"m": 30.0, "A": 30.0, "K": 100.0, "eps": 100.0, "p": 1.1},
        "snapshot_every": 50,
    },
}


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
    return config_from_dict(copy.deepcopy(PRESETS[name]), f"<preset {name}>")


def _read_fields_csv(path: str, g: RadialGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    missing = {"r", "u", "v", "w"} - set(data.dtype.names or ())
    if missing:
        raise ConfigError(f"{path}: missing columns {sorted(missing)}")
    if data["r"].shape != (g.N,) or not np.allclose(data["r"], g.r, rtol=1e-10, atol=1e-12):
        raise ConfigError(f"{path}: radii do not match the configured grid (N={g.N}, R={g.R})")
    return data["u"].copy(), data["v"].copy(), data["w"].copy()


def base_initial_data(cfg: RunConfig, g: RadialGrid) -> FullState:
    """Initial (u, v, w) before any drive step."""
    p, ini, m = cfg.params, cfg.initial, cfg.thresholds.m
    # discrete volume, so the constant state carries mass m exactly
    ubar = m / float(np.sum(g.vol_weights))
    if ini.kind == "file":
        u, v, w = _read_fields_csv(ini.path, g)
        return FullState(u, v, w)
    if ini.kind == "bump":
        u = make_bump(m, ini.sigma, g)
    else:
        u = np.full(g.N, ubar)
        if ini.perturbation > 0.0:
            rng = np.random.default_rng(cfg.seed)
            coef = rng.uniform(-1.0, 1.0, ini.modes)
            k = np.arange(1, ini.modes + 1)
            shape = np.cos(np.pi * np.outer(g.r / g.R, k)) @ coef
            shape /= np.max(np.abs(shape))
            u = ubar * (1.0 + ini.perturbation * shape)
            # cosines with k >= 1 are not mean-free under r^{n-1} weights
            u *= m / integrate_ball(u, g)
    v_level = p.alpha * ubar / p.beta if ini.v_level is None else ini.v_level
    w_level = p.gamma * ubar / p.delta if ini.w_level is None else ini.w_level
    return FullState(u, np.full(g.N, v_level), np.full(g.N, w_level))


def initial_state(cfg: RunConfig, g: RadialGrid) -> tuple[FullState, dict | None]:
    """Initial data for the run, plus drive metadata when ``initial.drive`` is set."""
    s = base_initial_data(cfg, g)
    if not cfg.initial.drive:
        return s, None
    th = cfg.thresholds
    res = drive_to_class(
        s.u, s.v, s.w, cfg.params, g, th.m, th.A, th.K, th.eps, p_exp=th.p, select=cfg.initial.drive_select
    )
    meta = {"sigma": res.sigma, "weight": res.weight, "distance": res.distance}
    return FullState(res.u0, res.v0, res.w0), meta


def as_mode_state(s: FullState, cfg: RunConfig) -> FullState | ReducedState:
    return s.reduce(cfg.params) if cfg.mode == "reduced" else s
