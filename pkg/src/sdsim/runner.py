"""Execute a scenario: initial data, the observer chain and the collected diagnostics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from . import fft

from .config import ScenarioConfig
from .diagnostics import (
    NormSeries,
    PhaseAccumulator,
    ProfileSnapshot,
    log_phase_fit,
    lp_channel,
    modified_profile,
    phase_coupling,
    wrap_guard_time,
)
from .dynamics import IntegrationDiverged, SystemState, evolve
from .spectral import (
    BoxEdgeWarning,
    ComplexField,
    RealField,
    boundary_mass_fraction,
    gaussian,
    h1_norm,
    lp_norm,
    low_pass_mask,
    moment_norm,
    spectrum_array,
)


def initial_state(cfg: ScenarioConfig) -> SystemState:
    grid = cfg.make_grid()
    ini = cfg.initial
    u0 = gaussian(grid, ini.u_amplitude, ini.u_sigma, ini.u_k or None)
    if ini.v_equilibrium:
        v0 = cfg.params.lam * np.abs(u0) ** 2
    else:
        v0 = gaussian(grid, ini.v_amplitude, ini.v_sigma).real
    return SystemState(ComplexField(grid, u0), RealField(grid, v0), 0.0)


def tail_energy_fraction(uh_centred: np.ndarray, grid, keep_fraction: float = 2 / 3) -> float:
    """Share of spectral energy outside the 2/3-rule band."""
    a2 = uh_centred.real**2 + uh_centred.imag**2
    total = float(a2.sum())
    if total == 0:
        return 0.0
    return float(a2[~low_pass_mask(grid, keep_fraction)].sum()) / total


def phase_history_mask(state: SystemState, fraction: float = 1e-2) -> np.ndarray:
    """Frequencies whose initial spectral weight is at least ``fraction`` of the peak."""
    a2 = np.abs(spectrum_array(state.grid, state.u.values)) ** 2
    return a2 >= fraction * a2.max() if a2.max() > 0 else np.zeros(a2.shape, dtype=bool)


@dataclass
class Trajectory:
    config: ScenarioConfig
    series: NormSeries
    initial: SystemState
    final: SystemState | None = None
    profiles: dict = field(default_factory=dict)
    phase: PhaseAccumulator | None = None
    modified: dict = field(default_factory=dict)
    diverged: IntegrationDiverged | None = None
    steps: int = 0

    def guard_time(self) -> float:
        return wrap_guard_time(self.series, self.config.diagnostics.wrap_guard_tol)

    def phase_log_ratio(self, t_min: float = 8.0, t_max: float | None = None, band_fraction: float = 0.5) -> float:
        """log_phase_fit over the recorded phase history on ``[t_min, t_max]``."""
        acc = self.phase
        t = np.asarray(acc.history_t)
        t_max = self.guard_time() if t_max is None else t_max
        keep = (t >= t_min) & (t <= t_max)
        psi = np.asarray(acc.history_psi)[keep]
        weight = np.asarray(acc.history_weight)[keep][-1]
        return log_phase_fit(psi, t[keep], weight, band_fraction)


class NormRecorder:
    """Computes every norms.csv channel for a state; also watches spectral resolution."""

    def __init__(self, cfg: ScenarioConfig, series: NormSeries, workers=None):
        self.cfg = cfg
        self.series = series
        self.workers = workers
        self.last_uh = None

    def record(self, state: SystemState) -> ProfileSnapshot:
        dg = self.cfg.diagnostics
        grid = state.grid
        u, v = state.u, state.v
        uh = spectrum_array(grid, u.values, self.workers)
        tail = tail_energy_fraction(uh, grid)
        if tail > dg.divergence_tail_tol:
            raise IntegrationDiverged(None, state.t, f"resolution lost (tail energy fraction {tail:.3g})")
        snap = ProfileSnapshot(state.t, ComplexField(grid, uh * np.exp(0.5j * state.t * grid.xi_sq()), "spectral"))
        values = {
            "l2_u": lp_norm(u, 2),
            "h1_u": h1_norm(ComplexField(grid, uh, "spectral")),
            "linf_u": lp_norm(u, math.inf),
            "l2_v": lp_norm(v, 2),
            "h1_v": h1_norm(v, workers=self.workers),
            "boundary_mass_fraction": boundary_mass_fraction(u, dg.shell),
        }
        for p in self.series.p_list:
            values[lp_channel(p)] = lp_norm(u, p)
        if dg.gamma:
            f_phys = ComplexField(grid, fft.fftshift(fft.ifftn(fft.ifftshift(snap.f_hat.values), workers=self.workers)) / grid.cell_volume)
            with warnings.catch_warnings():
                # edge mass is tracked by its own channel
                warnings.simplefilter("ignore", BoxEdgeWarning)
                xf = moment_norm(f_phys)
            values["xnorm_f"] = xf
            values["gamma_l2"] = xf
        self.series.append(state.t, **values)
        return snap


def _matches(t: float, targets, tol: float) -> float | None:
    for target in targets:
        if abs(t - target) <= tol:
            return target
    return None


def simulate(
    cfg: ScenarioConfig,
    state: SystemState | None = None,
    observers: tuple = (),
    on_snapshot: Callable[[SystemState], None] | None = None,
    step_offset: int = 0,
    workers=None,
    record_initial: bool = True,
) -> Trajectory:
    """Run ``cfg`` from its initial data (or from ``state`` when resuming)."""
    if state is None:
        state = initial_state(cfg)
    dg = cfg.diagnostics
    series = NormSeries(cfg.grid.d, dg.p_list)
    traj = Trajectory(cfg, series, state)
    recorder = NormRecorder(cfg, series, workers)
    tol = 1e-6 * cfg.output_spacing()
    # a linear run has no potential, so no phase is applied
    coupling = 0.0 if cfg.step.linear else phase_coupling(cfg.params.lam)
    if dg.phase:
        traj.phase = PhaseAccumulator(state.grid, dg.phase_window, dg.phase_spacing, cfg.params.mu,
                                      history_mask=phase_history_mask(state))

    def observe(s: SystemState):
        snap = recorder.record(s)
        if _matches(s.t, dg.profile_times, tol) is not None:
            traj.profiles[round(s.t, 9)] = snap
        if traj.phase is not None and s.t >= 1 - tol:
            traj.phase.update(ProfileSnapshot(1.0 if abs(s.t - 1) <= tol else s.t, snap.f_hat))
            if _matches(s.t, dg.profile_times, tol) is not None:
                traj.modified[round(s.t, 9)] = modified_profile(snap, traj.phase, coupling)
        if on_snapshot is not None and _matches(s.t, dg.snapshot_times, tol) is not None:
            on_snapshot(s)
        for obs in observers:
            obs(s)

    observe.__name__ = "scenario_observer"
    if record_initial:
        observe(state)
    try:
        traj.final = evolve(state, cfg.step_config(), cfg.debye(), [observe], step_offset, workers)
    except IntegrationDiverged as exc:
        traj.diverged = exc
    return traj
