"""Scenario-level experiments: decay fits, scaling symmetry, the NLS limit and smallness scans."""
from __future__ import annotations

import dataclasses
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import (
    DecaySpec,
    DiagnosticsSpec,
    GridSpec,
    InitialSpec,
    ParamSpec,
    ScenarioConfig,
    StepSpec,
    validate,
)
from .diagnostics import NormSeries, lp_channel, strichartz_norm, wrap_guard_time
from .dynamics import IntegrationDiverged, evolve_nls
from .runner import initial_state, simulate
from .spectral import ComplexField, lp_norm


class ExtrapolatedExponentWarning(UserWarning):
    pass


class WindowError(ValueError):
    pass


class WrapGuardError(ValueError):
    pass


# --- exponents and admissibility ------------------------------------------------


def _p_upper(d: int) -> float:
    return math.inf if d <= 2 else 2 * d / (d - 2)


def theoretical_decay_exponent(d: int, p: float) -> float:
    """Decay rate ``d (1/2 - 1/p)`` of ``||u(t)||_{L^p}``.

    For d = 4 this equals ``2 - 4/p``. Proven ranges: ``p = inf`` for d = 1
    (``2 < p < inf`` then follows by interpolation with the conserved mass),
    ``2 < p < 2d/(d-2)^+`` for d = 2, 3, ``2 < p < 4`` for d = 4. Outside them
    the exponent is still returned, with a warning.
    """
    if d not in (1, 2, 3, 4):
        raise ValueError(f"dimension must be 1..4, got {d}")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    inv = 0.0 if math.isinf(p) else 1.0 / p
    in_range = p == 2 or (p < _p_upper(d)) or (d == 1 and math.isinf(p))
    if not in_range:
        warnings.warn(f"p={p} is outside the proven range for d={d}; exponent extrapolated",
                      ExtrapolatedExponentWarning, stacklevel=2)
    return d * (0.5 - inv)


def admissible_pair(d: int, q: float, r: float, tol: float = 1e-12) -> bool:
    """Strichartz admissibility: ``2 <= r <= 2d/(d-2)^+``, ``2/q = d(1/2 - 1/r)``, ``(q, r) != (2, inf)``."""
    if d not in (1, 2, 3, 4):
        raise ValueError(f"dimension must be 1..4, got {d}")
    if not 2 <= r <= _p_upper(d):
        return False
    if q == 2 and math.isinf(r):
        return False
    lhs = 0.0 if math.isinf(q) else 2.0 / q
    rhs = d * (0.5 - (0.0 if math.isinf(r) else 1.0 / r))
    return abs(lhs - rhs) <= tol


# --- decay fits ------------------------------------------------------------------


@dataclass
class DecayFit:
    p: float
    exponent: float
    theoretical: float
    t_a: float
    t_b: float
    residual_rms: float
    n_samples: int
    intercept: float
    log_t: np.ndarray
    log_norm: np.ndarray

    def report(self) -> dict:
        return {
            "p": "inf" if math.isinf(self.p) else self.p,
            "exponent": self.exponent,
            "theoretical": -self.theoretical,
            "window": [self.t_a, self.t_b],
            "residual_rms": self.residual_rms,
            "n_samples": self.n_samples,
        }


def fit_decay(series: NormSeries, p: float, window, min_samples: int = 8,
              guard_tol: float = 1e-6, d: int | None = None) -> DecayFit:
    """Least-squares slope of ``log ||u(t)||_p`` against ``log t`` over ``window``.

    ``window = (t_a, t_b)``; ``t_b=None`` means "up to the wrap guard". The
    reported exponent is the signed slope (negative for decay).
    """
    t_a, t_b = window
    if "boundary_mass_fraction" in series.channels and any(
        x is not None for x in series.channels["boundary_mass_fraction"]
    ):
        guard = wrap_guard_time(series, guard_tol)
        if t_b is None:
            t_b = guard
        elif t_b > guard + 1e-12:
            raise WrapGuardError(f"window end {t_b} lies beyond the wrap guard {guard}")
    elif t_b is None:
        t_b = float(series.t()[-1])
    t = series.t()
    y = series.channel(lp_channel(p))
    keep = (t >= t_a) & (t <= t_b)
    t, y = t[keep], y[keep]
    if t.size < min_samples:
        raise WindowError(f"window [{t_a}, {t_b}] holds {t.size} samples, need {min_samples}")
    if not np.all(y > 0):
        raise ValueError("decay fit needs positive norm values")
    lt, ly = np.log(t), np.log(y)
    A = np.vstack([lt, np.ones_like(lt)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lt + icpt)
    dim = d if d is not None else series.d
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolatedExponentWarning)
        theo = theoretical_decay_exponent(dim, p) if dim in (1, 2, 3, 4) else math.nan
    return DecayFit(float(p), float(slope), theo, float(t_a), float(t_b),
                    float(np.sqrt(np.mean(resid**2))), int(t.size), float(icpt), lt, ly)


def decay_fits(series: NormSeries, cfg: ScenarioConfig) -> list[DecayFit]:
    """Fits for every configured p (``inf`` for d = 1) over the configured window."""
    ps = list(cfg.decay.p) or list(cfg.diagnostics.p_list)
    window = (cfg.decay.t_start, cfg.decay.t_stop)
    return [fit_decay(series, p, window, cfg.decay.min_samples, cfg.diagnostics.wrap_guard_tol) for p in ps]


# --- scenario presets --------------------------------------------------------------


def small_data_scenario(d: int, **overrides) -> ScenarioConfig:
    """Default small-data run: ``u0 = 0.1 exp(-|x|^2/2)``, ``v0 = 0.1 exp(-|x|^2/2)``, mu = 1."""
    presets = {
        1: dict(grid=GridSpec(1, 16384, 800.0), step=StepSpec(0.05, 96.0, None, 5),
                diagnostics=DiagnosticsSpec(p_list=(4.0,), profile_times=(10.0, 20.0, 40.0, 80.0), phase=True),
                decay=DecaySpec(p=(math.inf,), t_start=5.0)),
        2: dict(grid=GridSpec(2, 512, 204.8), step=StepSpec(0.05, 24.0, None, 5),
                diagnostics=DiagnosticsSpec(p_list=(4.0,), profile_times=(1.0, 2.0, 4.0, 8.0, 16.0)),
                decay=DecaySpec(p=(4.0,), t_start=3.0)),
        3: dict(grid=GridSpec(3, 96, 60.0), step=StepSpec(0.05, 6.5, None, 5),
                diagnostics=DiagnosticsSpec(p_list=(4.0,), profile_times=(0.75, 1.5, 3.0, 6.0)),
                decay=DecaySpec(p=(4.0,), t_start=2.0)),
        4: dict(grid=GridSpec(4, 32, 16.0), step=StepSpec(0.05, 5.0, None, 5),
                diagnostics=DiagnosticsSpec(p_list=(3.0, 4.0)),
                decay=DecaySpec(p=(3.0,), t_start=2.0)),
    }
    base = ScenarioConfig(params=ParamSpec(1.0, 1), initial=InitialSpec(), name=f"small_data_d{d}", **presets[d])
    return base.replace(**overrides) if overrides else validate(base)


def smooth_scenario(**overrides) -> ScenarioConfig:
    """Fixed smooth d = 1 case used for convergence-order checks."""
    base = ScenarioConfig(
        grid=GridSpec(1, 1024, 64.0),
        params=ParamSpec(1.0, 1),
        step=StepSpec(0.1, 1.0, None, 10**6),
        initial=InitialSpec(1.0, 1.0, (), 1.0, 1.0),
        diagnostics=DiagnosticsSpec(p_list=(), gamma=False),
        name="smooth_d1",
    )
    return base.replace(**overrides) if overrides else validate(base)


def box_doubled(cfg: ScenarioConfig) -> ScenarioConfig:
    """Same spacing on a box twice as long per axis."""
    g = cfg.grid
    return cfg.replace(grid={"n": 2 * g.n, "L": 2 * g.L, "max_points": max(g.max_points, (2 * g.n) ** g.d)},
                       diagnostics={"phase": False}, name=cfg.name + "_2L")


# --- convergence -------------------------------------------------------------------


def final_u(cfg: ScenarioConfig, dt: float | None = None) -> ComplexField:
    run = cfg if dt is None else cfg.replace(step={"dt": dt, "output_stride": 10**9})
    traj = simulate(run, record_initial=False)
    if traj.diverged is not None:
        raise traj.diverged
    return traj.final.u


def _l2_diff(a: ComplexField, b: ComplexField) -> float:
    return lp_norm(ComplexField(a.grid, a.values - b.values), 2)


def richardson_order(cfg: ScenarioConfig, dt: float, ref_factor: int = 32) -> tuple[float, float, float]:
    """Errors at ``dt`` and ``dt/2`` against a ``dt/ref_factor`` run, and the implied order."""
    ref = final_u(cfg, dt / ref_factor)
    e1 = _l2_diff(final_u(cfg, dt), ref)
    e2 = _l2_diff(final_u(cfg, dt / 2), ref)
    return e1, e2, math.log2(e1 / e2)


def nls_richardson_order(cfg: ScenarioConfig, dt: float, ref_factor: int = 32) -> tuple[float, float, float]:
    u0 = initial_state(cfg).u
    lam, T = cfg.params.lam, cfg.step.t_end
    ref = evolve_nls(u0, dt / ref_factor, T, lam)
    e1 = _l2_diff(evolve_nls(u0, dt, T, lam), ref)
    e2 = _l2_diff(evolve_nls(u0, dt / 2, T, lam), ref)
    return e1, e2, math.log2(e1 / e2)


def splitting_error(cfg: ScenarioConfig) -> float:
    """Relative L2 change of the final u when dt is halved."""
    a = final_u(cfg)
    b = final_u(cfg, cfg.step.dt / 2)
    return _l2_diff(a, b) / lp_norm(b, 2)


# --- pseudo-scaling ------------------------------------------------------------------


def scaling_orientation_closes(orientation: str) -> bool:
    """Substitute the rescaled pair into both equations and check they vanish identically.

    Candidate: ``u* = c^(1/2) u(c^(1/2) x, c t)``, ``v* = c v(c^(1/2) x, c t)`` solving the
    system with relaxation constant ``mu*``; ``orientation`` picks ``c = mu/mu*`` or ``c = mu*/mu``.
    """
    import sympy as sp

    if orientation not in ("mu/mu*", "mu*/mu"):
        raise ValueError(f"unknown orientation {orientation!r}")
    x, t, c, mu, mus = sp.symbols("x t c mu mu_star", positive=True)
    lam = sp.Symbol("lambda", real=True)
    y, s = sp.symbols("y s", real=True)
    U, V = sp.Function("U"), sp.Function("V")
    X, T = sp.sqrt(c) * x, c * t
    us = sp.sqrt(c) * U(X, T)
    vs = c * V(X, T)
    u_t = sp.Derivative(U(y, s), s)
    u_xx = sp.Derivative(U(y, s), (y, 2))
    v_t = sp.Derivative(V(y, s), s)

    def back(expr):
        # evaluate at the base point (y, s) = (sqrt(c) x, c t)
        return expr.doit().subs({x: y / sp.sqrt(c), t: s / c}).doit()

    # the base pair solves i U_t = -U_yy/2 + U V and mu V_t = lam |U|^2 - V
    rules = {u_t: (-sp.Rational(1, 2) * u_xx + U(y, s) * V(y, s)) / sp.I,
             v_t: (lam * U(y, s) * sp.conjugate(U(y, s)) - V(y, s)) / mu}
    ratio = mu / mus if orientation == "mu/mu*" else mus / mu
    eq_u = back(sp.I * sp.diff(us, t) + sp.Rational(1, 2) * sp.diff(us, x, 2) - us * vs)
    eq_v = back(mus * sp.diff(vs, t) + vs - lam * us * sp.conjugate(us))
    return all(sp.simplify(e.subs(rules).subs(c, ratio)) == 0 for e in (eq_u, eq_v))


def derive_scaling_orientation() -> str:
    """The orientation of ``c`` for which the pseudo-scaling map closes."""
    good = [o for o in ("mu/mu*", "mu*/mu") if scaling_orientation_closes(o)]
    if len(good) != 1:
        raise RuntimeError(f"pseudo-scaling substitution is ambiguous: {good}")
    return good[0]


def rescaled_scenario(base: ScenarioConfig, c: float, orientation: str = "mu/mu*") -> ScenarioConfig:
    """Scenario for ``u* = c^(1/2) u(c^(1/2) x, c t)``, i.e. time compressed by ``c``."""
    mu = base.params.mu
    mu_star = mu / c if orientation == "mu/mu*" else mu * c
    r = math.sqrt(c)
    ini = base.initial
    return base.replace(
        grid={"L": base.grid.L / r},
        params={"mu": mu_star},
        step={"dt": base.step.dt / c, "t_end": base.step.t_end / c},
        initial={
            "u_amplitude": r * ini.u_amplitude,
            "u_sigma": ini.u_sigma / r,
            "u_k": tuple(r * k for k in ini.u_k),
            "v_amplitude": c * ini.v_amplitude,
            "v_sigma": ini.v_sigma / r,
        },
        diagnostics={"profile_times": (), "snapshot_times": (), "phase": False},
        name=base.name + f"_scaled{c:g}",
    )


def scaling_invariance_check(base: ScenarioConfig, c: float, orientation: str = "mu/mu*") -> float:
    """Relative L2 gap between the rescaled run and the rescaled base solution at matched times."""
    if not c > 0:
        raise ValueError("c must be > 0")
    base = base.replace(diagnostics={"profile_times": (), "snapshot_times": (), "phase": False})
    small = rescaled_scenario(base, c, orientation)
    u_base = final_u(base)
    u_star = final_u(small)
    mapped = math.sqrt(c) * u_base.values  # grid points x*_j = x_j / sqrt(c) coincide index by index
    return float(np.linalg.norm(u_star.values - mapped) / np.linalg.norm(u_star.values))


# --- mu -> 0 ----------------------------------------------------------------------------


def _mu_divergence(args) -> float:
    base, mu = args
    cfg = base.replace(params={"mu": mu}, initial={"v_equilibrium": True})
    try:
        u_sd = final_u(cfg)
    except IntegrationDiverged:
        return math.nan
    u0 = initial_state(cfg).u
    u_nls = evolve_nls(u0, cfg.step.dt, cfg.step.t_end, cfg.params.lam)
    return _l2_diff(u_sd, u_nls)


def parallel_map(fn, items, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def mu_limit_sweep(base: ScenarioConfig, mu_list, threads: int = 1) -> list[float]:
    """``||u_SD^mu(t_end) - u_NLS(t_end)||_2`` for each mu, with well-prepared ``v0 = lam |u0|^2``.

    Diverged runs give NaN.
    """
    mus = [float(m) for m in mu_list]
    if any(m <= 0 for m in mus) or any(b >= a for a, b in zip(mus, mus[1:])):
        raise ValueError("mu_list must be positive and strictly decreasing")
    base = base.replace(diagnostics={"profile_times": (), "snapshot_times": (), "phase": False})
    return parallel_map(_mu_divergence, [(base, m) for m in mus], threads)


def log_slope(xs, ys) -> float:
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


# --- smallness scan -----------------------------------------------------------------------


@dataclass
class ScanRow:
    amplitude: float
    completed: bool
    strichartz_l2l4: float
    sup_h1: float
    diverged_step: int | None
    reason: str = ""


def _scan_one(args) -> ScanRow:
    base, amp = args
    cfg = base.replace(initial={"u_amplitude": amp})
    traj = simulate(cfg)
    s = traj.series
    l2l4 = strichartz_norm(s, 2.0, 4.0) if len(s) > 1 else 0.0
    h1 = float(np.nanmax(s.channel("h1_u"))) if len(s) else 0.0
    if traj.diverged is not None:
        return ScanRow(amp, False, l2l4, h1, traj.diverged.step, traj.diverged.reason)
    return ScanRow(amp, True, l2l4, h1, None)


def smallness_scan(base: ScenarioConfig, amplitudes, threads: int = 1) -> list[ScanRow]:
    amps = [float(a) for a in amplitudes]
    if any(b <= a for a, b in zip(amps, amps[1:])):
        raise ValueError("amplitudes must be increasing")
    if 4.0 not in base.diagnostics.p_list:
        base = base.replace(diagnostics={"p_list": tuple(base.diagnostics.p_list) + (4.0,)})
    base = base.replace(diagnostics={"profile_times": (), "snapshot_times": (), "phase": False})
    return parallel_map(_scan_one, [(base, a) for a in amps], threads)


def threshold_bracket(rows: list[ScanRow]) -> tuple[float | None, float | None]:
    """(largest amplitude that reached the horizon, smallest that did not)."""
    ok = [r.amplitude for r in rows if r.completed]
    bad = [r.amplitude for r in rows if not r.completed]
    return (max(ok) if ok else None, min(bad) if bad else None)


def scan_table(rows: list[ScanRow]) -> list[dict]:
    return [dataclasses.asdict(r) for r in rows]
