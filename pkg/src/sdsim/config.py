"""Scenario configuration: dataclasses, defaults and strict JSON loading."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .dynamics import PRECISIONS, DebyeParams, StepConfig
from .spectral import make_grid


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    d: int = 1
    n: int = 1024
    L: float = 64.0
    max_points: int = 1 << 24


@dataclass(frozen=True)
class ParamSpec:
    mu: float = 1.0
    lam: int = 1


@dataclass(frozen=True)
class StepSpec:
    dt: float = 0.01
    t_end: float = 1.0
    filter_fraction: float | None = None
    output_stride: int = 10
    linear: bool = False
    precision: str = "extended"  # long double free-step transforms; "double" is faster


@dataclass(frozen=True)
class InitialSpec:
    """u0 = A exp(-|x|^2 / 2 sigma^2) exp(i k.x); v0 = B exp(-|x|^2 / 2 sigma_v^2)."""

    u_amplitude: float = 0.1
    u_sigma: float = 1.0
    u_k: tuple = ()
    v_amplitude: float = 0.1
    v_sigma: float = 1.0
    v_equilibrium: bool = False  # v0 = lam |u0|^2 instead of the Gaussian


@dataclass(frozen=True)
class DiagnosticsSpec:
    p_list: tuple = (4.0,)
    gamma: bool = True
    profile_times: tuple = ()
    snapshot_times: tuple = ()
    phase: bool = False
    phase_window: float = 40.0
    phase_spacing: float = 0.25
    wrap_guard_tol: float = 1e-6
    shell: float = 0.1
    divergence_tail_tol: float = 1e-3


@dataclass(frozen=True)
class DecaySpec:
    """Decay window policy: fit over [t_start, min(t_stop, wrap guard)]."""

    p: tuple = ()
    t_start: float = 2.0
    t_stop: float | None = None
    min_samples: int = 8


@dataclass(frozen=True)
class ScenarioConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    params: ParamSpec = field(default_factory=ParamSpec)
    step: StepSpec = field(default_factory=StepSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    decay: DecaySpec = field(default_factory=DecaySpec)
    name: str = "scenario"

    # convenience accessors used by the runner
    def make_grid(self):
        g = self.grid
        return make_grid(g.d, g.n, g.L, g.max_points)

    def debye(self) -> DebyeParams:
        return DebyeParams(self.params.mu, self.params.lam)

    def step_config(self) -> StepConfig:
        s = self.step
        return StepConfig(s.dt, s.t_end, s.filter_fraction, s.output_stride, s.linear, s.precision)

    def output_spacing(self) -> float:
        return self.step.dt * self.step.output_stride

    def to_dict(self) -> dict:
        return _to_jsonable(dataclasses.asdict(self))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **sections) -> "ScenarioConfig":
        """Copy with nested overrides, e.g. ``cfg.replace(step={"dt": 0.05})``."""
        changes = {}
        for key, val in sections.items():
            cur = getattr(self, key)
            if isinstance(val, dict) and dataclasses.is_dataclass(cur):
                changes[key] = dataclasses.replace(cur, **val)
            else:
                changes[key] = val
        out = dataclasses.replace(self, **changes)
        validate(out)
        return out


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


# --- strict construction ------------------------------------------------------

_JSON_KEYS = {"lambda": "lam"}
_JSON_KEYS_BACK = {v: k for k, v in _JSON_KEYS.items()}


def _coerce(value, hint, where: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected an object")
        return _build(hint, value, where)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(value, inner, where)
    if hint is tuple or origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        return tuple(_scalar(v, float, f"{where}[{i}]") for i, v in enumerate(value))
    return _scalar(value, hint, where)


def _scalar(value, hint, where):
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where}: expected an integer")
        return value
    if hint is float:
        if value in ("inf", "Infinity"):
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    return value


def _build(cls, data: dict, where: str = "config"):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        attr = _JSON_KEYS.get(key, key)
        if attr not in names:
            raise ConfigError(f"{where}: unknown key {key!r}")
        kwargs[attr] = _coerce(value, hints[attr], f"{where}.{key}")
    return cls(**kwargs)


def _fail(field_name: str, constraint: str):
    raise ConfigError(f"{field_name} must be {constraint}")


def _upper_p(d: int) -> float:
    return math.inf if d <= 2 else 2 * d / (d - 2)


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    g, p, s, i, dg, dc = cfg.grid, cfg.params, cfg.step, cfg.initial, cfg.diagnostics, cfg.decay
    if g.d not in (1, 2, 3, 4):
        _fail("grid.d", "one of 1, 2, 3, 4")
    try:
        make_grid(g.d, g.n, g.L, g.max_points)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    if not (p.mu > 0 and math.isfinite(p.mu)):
        _fail("mu", "> 0")
    if p.lam not in (-1, 1):
        raise ConfigError("lambda must be -1 or 1")
    if not (s.dt > 0 and math.isfinite(s.dt)):
        _fail("step.dt", "> 0")
    if not (s.t_end > 0 and math.isfinite(s.t_end)):
        _fail("step.t_end", "> 0 (the initial time)")
    if s.output_stride < 1:
        _fail("step.output_stride", ">= 1")
    if s.filter_fraction is not None and not 0 < s.filter_fraction <= 1:
        _fail("step.filter_fraction", "in (0, 1]")
    if s.precision not in PRECISIONS:
        _fail("step.precision", " or ".join(repr(p) for p in PRECISIONS))
    for name in ("u_amplitude", "v_amplitude"):
        if not math.isfinite(getattr(i, name)):
            _fail(f"initial.{name}", "finite")
    for name in ("u_sigma", "v_sigma"):
        if not getattr(i, name) > 0:
            _fail(f"initial.{name}", "> 0")
    if i.u_k and len(i.u_k) != g.d:
        _fail("initial.u_k", f"a list of {g.d} wavenumbers")
    hi = _upper_p(g.d)
    for q in dg.p_list:
        if not 2 < q <= hi or math.isinf(q):
            _fail("diagnostics.p_list", f"finite and inside (2, {hi:g}] for d={g.d}")
    for q in dc.p:
        if math.isinf(q) and g.d == 1:
            continue
        if not 2 < q < hi:
            _fail("decay.p", f"inside (2, {hi:g}) for d={g.d}")
    missing = {q for q in dc.p if not math.isinf(q)} - set(dg.p_list)
    if missing:
        _fail("decay.p", f"a subset of diagnostics.p_list (missing {sorted(missing)})")
    if dc.t_start < 2:
        _fail("decay.t_start", ">= 2")
    if dc.min_samples < 8:
        _fail("decay.min_samples", ">= 8")
    if not 0 < dg.shell < 0.5:
        _fail("diagnostics.shell", "in (0, 0.5)")
    spacing = cfg.output_spacing()
    for label, times in (("profile_times", dg.profile_times), ("snapshot_times", dg.snapshot_times)):
        for t in times:
            k = t / spacing
            if t < 0 or t > s.t_end or abs(k - round(k)) > 1e-6:
                _fail(f"diagnostics.{label}", f"multiples of dt*output_stride={spacing:g} within [0, t_end]")
    if dg.phase:
        if g.d != 1:
            _fail("diagnostics.phase", "used only with d=1")
        if spacing > dg.phase_spacing * (1 + 1e-9):
            _fail("step", f"such that dt*output_stride <= phase_spacing={dg.phase_spacing}")
        k = 1.0 / spacing
        if abs(k - round(k)) > 1e-6:
            _fail("step", "such that t=1 is an output time (phase starts there)")
        if s.t_end < 1:
            _fail("step.t_end", ">= 1 when the phase is tracked")
    return cfg


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    try:
        cfg = _build(ScenarioConfig, data)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return validate(cfg)


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return config_from_dict(data)


def config_to_json(cfg: ScenarioConfig) -> str:
    data = cfg.to_dict()
    data["params"] = {_JSON_KEYS_BACK.get(k, k): v for k, v in data["params"].items()}
    return json.dumps(data, indent=2, sort_keys=True)
