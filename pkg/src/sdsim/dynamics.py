"""Strang splitting for the Schrodinger-Debye system.

The system ``i u_t + 1/2 Lap u = u v``, ``mu v_t + v = lam |u|^2`` is split into

* A: the free flow ``i u_t + 1/2 Lap u = 0`` (exact spectral multiplier), and
* B: the pointwise flow ``i u_t = u v``, ``mu v_t + v = lam |u|^2``.

B keeps ``|u|`` frozen, so ``v`` relaxes linearly and ``u`` picks up the phase
``exp(-i int_0^h v)``; both are available in closed form. A step is
``B(h/2) A(h) B(h/2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from . import fft

from .spectral import (
    ComplexField,
    RealField,
    SpatialGrid,
    low_pass_mask,
    same_grid,
    xi_sq_fft_order,
)


class IntegrationDiverged(RuntimeError):
    def __init__(self, step: int | None, t: float | None = None, reason: str = "non-finite sample"):
        self.step = step
        self.t = t
        self.reason = reason
        where = f" at step {step}" if step is not None else ""
        when = f" (t={t:.6g})" if t is not None else ""
        super().__init__(f"integration diverged{where}{when}: {reason}")


class ObserverError(RuntimeError):
    pass


@dataclass(frozen=True)
class DebyeParams:
    mu: float = 1.0
    lam: int = 1

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError("mu must be > 0")
        if self.lam not in (-1, 1):
            raise ValueError("lambda must be -1 or 1")


@dataclass(frozen=True)
class SystemState:
    u: ComplexField
    v: RealField
    t: float = 0.0

    def __post_init__(self):
        same_grid(self.u.grid, self.v.grid)
        if self.u.domain != "physical":
            raise ValueError("state u must be a physical-domain field")
        if not math.isfinite(self.t):
            raise ValueError("state time must be finite")

    @property
    def grid(self) -> SpatialGrid:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: SpatialGrid, u, v, t: float = 0.0) -> "SystemState":
        return cls(ComplexField(grid, u), RealField(grid, v), float(t))


PRECISIONS = ("double", "extended")


@dataclass(frozen=True)
class StepConfig:
    dt: float
    t_end: float
    filter_fraction: float | None = None
    output_stride: int = 1
    linear: bool = False  # drop the coupling: pure free flow for u, v untouched
    precision: str = "extended"  # long double free-step transforms; "double" is faster

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be > 0")
        if not math.isfinite(self.t_end):
            raise ValueError("t_end must be finite")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise ValueError("output_stride must be an integer >= 1")
        if self.filter_fraction is not None and not 0 < self.filter_fraction <= 1:
            raise ValueError("filter_fraction must lie in (0, 1]")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}")


# --- the exact pointwise sub-flow -------------------------------------------


def _relax_coeffs(h: float, mu: float) -> tuple[float, float, float]:
    """``exp(-x)``, ``1 - exp(-x)`` and ``h - mu (1 - exp(-x))`` for ``x = h / mu``."""
    x = h / mu
    one_minus = -math.expm1(-x)
    if x < 1e-3:
        # x - (1 - e^-x) by series; the direct difference cancels
        rest = mu * x * x * (0.5 - x * (1 / 6 - x * (1 / 24 - x / 120)))
    else:
        rest = h - mu * one_minus
    return math.exp(-x), one_minus, rest


def _debye_numpy(u, v, decay, one_minus, rest, mu, lam):
    a2 = u.real**2 + u.imag**2
    theta = (mu * one_minus) * v + (lam * rest) * a2
    return u * np.exp(-1j * theta), decay * v + (lam * one_minus) * a2


try:
    import numba
except ImportError:  # pragma: no cover
    _debye_fused = None
else:

    @numba.njit(cache=True)
    def _debye_loop(u, v, decay, one_minus, rest, mu, lam, u_out, v_out):
        for i in range(u.size):
            z = u[i]
            a2 = z.real * z.real + z.imag * z.imag
            theta = mu * one_minus * v[i] + lam * rest * a2
            c = np.cos(theta)
            s = np.sin(theta)
            u_out[i] = complex(z.real * c + z.imag * s, z.imag * c - z.real * s)
            v_out[i] = decay * v[i] + lam * one_minus * a2

    def _debye_fused(u, v, decay, one_minus, rest, mu, lam):
        u = np.ascontiguousarray(u, dtype=np.complex128)
        v = np.ascontiguousarray(v, dtype=np.float64)
        u_out = np.empty_like(u)
        v_out = np.empty_like(v)
        _debye_loop(u.reshape(-1), v.reshape(-1), decay, one_minus, rest, mu, float(lam),
                    u_out.reshape(-1), v_out.reshape(-1))
        return u_out, v_out


def debye_arrays(u: np.ndarray, v: np.ndarray, h: float, mu: float, lam: int, freeze_u: bool = False):
    decay, one_minus, rest = _relax_coeffs(h, mu)
    if freeze_u:
        return u, decay * v + (lam * one_minus) * (u.real**2 + u.imag**2)
    if _debye_fused is not None and u.size >= 4096:
        return _debye_fused(u, v, decay, one_minus, rest, mu, lam)
    return _debye_numpy(u, v, decay, one_minus, rest, mu, lam)


def debye_potential_flow(state: SystemState, h: float, params: DebyeParams, freeze_u: bool = False) -> SystemState:
    """Exact flow of ``i u_t = u v, mu v_t + v = lam |u|^2`` over time ``h`` at every grid point.

    ``freeze_u`` leaves ``u`` untouched (relaxation of ``v`` against a fixed ``|u|^2``).
    """
    if h < 0:
        raise ValueError("h must be >= 0")
    u, v = debye_arrays(state.u.values, state.v.values, h, params.mu, params.lam, freeze_u)
    return SystemState.from_arrays(state.grid, u, v, state.t + h)


# --- split-step machinery ---------------------------------------------------


class _FreeStep:
    """Cached free multiplier (plus optional anti-alias mask) for one step size."""

    def __init__(self, grid: SpatialGrid, h: float, filter_fraction: float | None, workers=None,
                 precision: str = "extended"):
        self.h = h
        self.workers = workers
        self.extended = precision == "extended"
        xi_sq = xi_sq_fft_order(grid)
        if self.extended:
            # a long double multiplier keeps |mult| = 1 well below double round-off
            xi_sq = xi_sq.astype(np.longdouble)
        mult = np.exp(-0.5j * h * xi_sq)
        if filter_fraction is not None and filter_fraction < 1:
            mult = mult * fft.ifftshift(low_pass_mask(grid, filter_fraction))
        self.mult = mult

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self.extended:
            uh = fft.fftn_extended(u, workers=self.workers)
            uh *= self.mult
            return fft.ifftn_extended(uh, workers=self.workers).astype(np.complex128)
        uh = fft.fftn(u, workers=self.workers)
        uh *= self.mult
        return fft.ifftn(uh, workers=self.workers)


def _check_finite(u: np.ndarray, v: np.ndarray, step, t):
    if not (np.isfinite(u.sum()) and np.isfinite(v.sum())):
        raise IntegrationDiverged(step, t)


def strang_step(
    state: SystemState,
    h: float,
    params: DebyeParams,
    filter_fraction: float | None = None,
    step_index: int | None = None,
    workers=None,
    precision: str = "extended",
) -> SystemState:
    """One ``B(h/2) A(h) B(h/2)`` step."""
    if not h > 0:
        raise ValueError("h must be > 0")
    free = _FreeStep(state.grid, h, filter_fraction, workers, precision)
    u, v = debye_arrays(state.u.values, state.v.values, 0.5 * h, params.mu, params.lam)
    u = free(u)
    u, v = debye_arrays(u, v, 0.5 * h, params.mu, params.lam)
    _check_finite(u, v, step_index, state.t + h)
    return SystemState.from_arrays(state.grid, u, v, state.t + h)


def step_schedule(t0: float, t_end: float, dt: float) -> int:
    """Number of steps to reach ``t_end`` from ``t0``; the last one may be shortened."""
    span = t_end - t0
    if span < 0:
        raise ValueError(f"t_end={t_end} precedes the state time {t0}")
    if span == 0:
        return 0
    return max(1, math.ceil(span / dt - 1e-9))


Observer = Callable[[SystemState], None]


def evolve(
    state: SystemState,
    cfg: StepConfig,
    params: DebyeParams,
    observers: Sequence[Observer] = (),
    step_offset: int = 0,
    workers=None,
) -> SystemState:
    """Advance ``state`` to ``cfg.t_end`` with Strang steps of size ``cfg.dt``.

    Step ``k`` ends at ``t0 + k*dt`` (the final step is shortened to land on
    ``t_end``). Observers see the state after every ``output_stride``-th step
    and after the last one. Consecutive half-steps of B between observations
    are merged into one exact B step.
    """
    grid = state.grid
    t0 = state.t
    nsteps = step_schedule(t0, cfg.t_end, cfg.dt)
    if nsteps == 0:
        return state
    stride = int(cfg.output_stride)
    mu, lam = params.mu, params.lam
    u = np.array(state.u.values)
    v = np.array(state.v.values)
    full = _FreeStep(grid, cfg.dt, cfg.filter_fraction, workers, cfg.precision)
    pending = 0.0
    t = t0
    for k in range(1, nsteps + 1):
        t_next = cfg.t_end if k == nsteps else t0 + k * cfg.dt
        h = t_next - t
        free = full if h == cfg.dt else _FreeStep(grid, h, cfg.filter_fraction, workers, cfg.precision)
        if not cfg.linear:
            u, v = debye_arrays(u, v, pending + 0.5 * h, mu, lam)
        u = free(u)
        pending = 0.5 * h
        t = t_next
        observe = k % stride == 0 or k == nsteps
        if observe and not cfg.linear:
            u, v = debye_arrays(u, v, pending, mu, lam)
            pending = 0.0
        _check_finite(u, v, step_offset + k, t)
        if observe:
            current = SystemState.from_arrays(grid, u, v, t)
            for obs in observers:
                try:
                    obs(current)
                except IntegrationDiverged as exc:
                    exc.step = step_offset + k if exc.step is None else exc.step
                    raise
                except Exception as exc:
                    name = getattr(obs, "__name__", type(obs).__name__)
                    raise ObserverError(
                        f"observer {name} failed at step {step_offset + k} (t={t:.6g}): {exc}"
                    ) from exc
    return current


# --- cubic NLS reference ------------------------------------------------------


def _nls_phase(u: np.ndarray, h: float, lam: int) -> np.ndarray:
    return u * np.exp(-1j * lam * h * (u.real**2 + u.imag**2))


def nls_step(u: ComplexField, h: float, lam: int, workers=None) -> ComplexField:
    """Strang step for ``i u_t + 1/2 Lap u = lam |u|^2 u`` (the mu -> 0 limit)."""
    if not h > 0:
        raise ValueError("h must be > 0")
    free = _FreeStep(u.grid, h, None, workers)
    w = _nls_phase(free(_nls_phase(u.values, 0.5 * h, lam)), 0.5 * h, lam)
    _check_finite(w, np.zeros(1), None, None)
    return ComplexField(u.grid, w)


def evolve_nls(u: ComplexField, dt: float, t_span: float, lam: int, workers=None) -> ComplexField:
    nsteps = step_schedule(0.0, t_span, dt)
    w = np.array(u.values)
    full = _FreeStep(u.grid, dt, None, workers)
    t = 0.0
    pending = 0.0
    for k in range(1, nsteps + 1):
        t_next = t_span if k == nsteps else k * dt
        h = t_next - t
        free = full if h == dt else _FreeStep(u.grid, h, None, workers)
        w = free(_nls_phase(w, pending + 0.5 * h, lam))
        pending = 0.5 * h
        t = t_next
        _check_finite(w, np.zeros(1), k, t)
    return ComplexField(u.grid, _nls_phase(w, pending, lam))


def with_time(state: SystemState, t: float) -> SystemState:
    return replace(state, t=float(t))
