"""Observables for scattering and decay: profiles, weighted norms and the phase correction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .spectral import (
    ComplexField,
    GridMismatchError,
    SpatialGrid,
    SPECTRAL,
    boundary_mass_fraction,
    free_propagate,
    gradient,
    moment_norm,
    spectral_l2,
    spectrum_array,
)

__all__ = [
    "ProfileSnapshot",
    "NormSeries",
    "PhaseAccumulator",
    "profile",
    "scattering_residual",
    "gamma_norm",
    "gamma_norm_pseudoconformal",
    "strichartz_norm",
    "y_norm",
    "phase_update",
    "modified_profile",
    "log_phase_fit",
    "phase_coupling",
    "boundary_mass_fraction",
    "wrap_guard_time",
]


class PhaseOrderError(ValueError):
    pass


class MissingChannelError(KeyError):
    pass


@dataclass(frozen=True)
class ProfileSnapshot:
    t: float
    f_hat: ComplexField

    @property
    def grid(self) -> SpatialGrid:
        return self.f_hat.grid


def profile(u: ComplexField, t: float, workers=None) -> ProfileSnapshot:
    """Fourier transform of ``f(t) = S(-t) u(t)``."""
    if t < 0:
        raise ValueError("profile time must be >= 0")
    uh = spectrum_array(u.grid, u.values, workers)
    if t != 0:
        uh = uh * np.exp(0.5j * t * u.grid.xi_sq())
    return ProfileSnapshot(float(t), ComplexField(u.grid, uh, SPECTRAL))


def scattering_residual(a: ProfileSnapshot, b: ProfileSnapshot) -> float:
    """``||f(t_a) - f(t_b)||_2`` measured on the spectral side."""
    if a.grid != b.grid:
        raise GridMismatchError("profiles live on different grids")
    return spectral_l2(a.f_hat.values - b.f_hat.values, a.grid)


def gamma_norm(u: ComplexField, t: float, workers=None) -> float:
    """``||(x + i t grad) u||_2``, evaluated as ``||x S(-t) u||_2`` since ``Gamma = S(t) x S(-t)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return moment_norm(free_propagate(u, -t, workers))


def gamma_norm_pseudoconformal(u: ComplexField, t: float, workers=None) -> float:
    """Same quantity via ``Gamma u = i t exp(i|x|^2/2t) grad(exp(-i|x|^2/2t) u)``.

    Only meaningful when the chirp ``|x|/t`` stays below the grid's Nyquist frequency.
    """
    if t <= 0:
        raise ValueError("t must be > 0")
    z = ComplexField(u.grid, np.exp(-0.5j * u.grid.radius_sq() / t) * u.values)
    total = sum(float(np.vdot(g, g).real) for g in gradient(z, workers))
    return t * math.sqrt(total * u.grid.cell_volume)


# --- time series ------------------------------------------------------------


def lp_channel(p: float) -> str:
    if math.isinf(p):
        return "linf_u"
    if p == 2:
        return "l2_u"
    return f"lp_u_{p:g}"


BASE_CHANNELS = ("l2_u", "h1_u", "linf_u")
TAIL_CHANNELS = ("l2_v", "h1_v", "xnorm_f", "gamma_l2", "boundary_mass_fraction")


@dataclass
class NormSeries:
    d: int
    p_list: tuple = ()
    times: list = field(default_factory=list)
    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p_list = tuple(float(p) for p in self.p_list)
        for name in self.columns()[1:]:
            self.channels.setdefault(name, [])

    def columns(self) -> list[str]:
        return ["t", *BASE_CHANNELS, *(lp_channel(p) for p in self.p_list), *TAIL_CHANNELS]

    def append(self, t: float, **values) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("series times must increase")
        unknown = set(values) - set(self.channels)
        if unknown:
            raise MissingChannelError(f"unknown channels {sorted(unknown)}")
        self.times.append(float(t))
        for name, col in self.channels.items():
            val = values.get(name)
            col.append(None if val is None else float(val))

    def __len__(self) -> int:
        return len(self.times)

    def t(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    def channel(self, name: str) -> np.ndarray:
        if name not in self.channels:
            raise MissingChannelError(f"no channel {name!r} in series")
        return np.array([np.nan if x is None else x for x in self.channels[name]], dtype=float)


def _select(series: NormSeries, name: str, t_range):
    t = series.t()
    y = series.channel(name)
    if t_range is not None:
        lo, hi = t_range
        keep = (t >= lo) & (t <= hi)
        t, y = t[keep], y[keep]
    return t, y


def strichartz_norm(series: NormSeries, q: float, r: float, t_range=None) -> float:
    """``||u||_{L^q_t L^r_x}`` over the recorded samples (trapezoid in time)."""
    t, y = _select(series, lp_channel(r), t_range)
    if y.size == 0:
        return 0.0
    if np.isnan(y).any():
        raise MissingChannelError(f"channel {lp_channel(r)!r} has missing samples")
    if math.isinf(q):
        return float(y.max())
    if y.size == 1:
        return 0.0
    return float(np.trapezoid(y**q, t) ** (1.0 / q))


def y_norm(series: NormSeries, alpha: float) -> float:
    """Weighted running suprema ``t^(1/2) ||u||_inf + t^-a ||u||_H1 + t^-a ||x f||_2 + ||u||_2``."""
    if not 0 < alpha < 1 / 6:
        raise ValueError("alpha must lie in (0, 1/6)")
    t = series.t()
    if t.size == 0:
        return 0.0
    if t.min() < 1:
        raise ValueError("y_norm needs a series rebased at t >= 1")
    w = t**-alpha
    terms = (
        np.sqrt(t) * series.channel("linf_u"),
        w * series.channel("h1_u"),
        w * series.channel("xnorm_f"),
        series.channel("l2_u"),
    )
    return float(sum(np.max(x) for x in terms))


def wrap_guard_time(series: NormSeries, tol: float = 1e-6) -> float:
    """Last recorded time before the boundary-mass fraction first exceeds ``tol``."""
    t = series.t()
    frac = series.channel("boundary_mass_fraction")
    bad = np.nonzero(frac > tol)[0]
    if bad.size == 0:
        return float(t[-1]) if t.size else math.inf
    i = int(bad[0])
    return float(t[i - 1]) if i > 0 else -math.inf


# --- phase correction ---------------------------------------------------------


class _SnapshotRing:
    """Time-ordered ``(s', |f_hat|^2)`` history in one contiguous array, pruned from the front."""

    def __init__(self, shape: tuple, capacity: int = 64):
        self.shape = shape
        self._t = np.empty(capacity)
        self._rows = np.empty((capacity,) + shape)
        self._lo = 0
        self._hi = 0

    def __len__(self) -> int:
        return self._hi - self._lo

    def append(self, s: float, a2: np.ndarray) -> None:
        if self._hi == self._t.size:
            live = len(self)
            cap = max(2 * live, 64)
            t, rows = np.empty(cap), np.empty((cap,) + self.shape)
            t[:live] = self._t[self._lo:self._hi]
            rows[:live] = self._rows[self._lo:self._hi]
            self._t, self._rows, self._lo, self._hi = t, rows, 0, live
        self._t[self._hi] = s
        self._rows[self._hi] = a2
        self._hi += 1

    def prune(self, cutoff: float) -> None:
        """Drop leading entries while the second one is still at or before ``cutoff``."""
        while len(self) > 2 and self._t[self._lo + 1] <= cutoff:
            self._lo += 1

    @property
    def times(self) -> np.ndarray:
        return self._t[self._lo:self._hi]

    @property
    def rows(self) -> np.ndarray:
        return self._rows[self._lo:self._hi]


class PhaseAccumulator:
    """Running value of the double time integral

        Psi(xi, t) = int_1^t int_1^s (1/(2 s')) K(s - s') |f_hat(s xi / s', s')|^2 ds' ds,

    with ``K(r) = exp(-r / mu) / mu``. The inner integral is truncated to
    ``s' >= s - window`` and both integrals use the trapezoid rule on the
    snapshot times; ``|f_hat|^2`` at the stretched frequency is linearly
    interpolated and taken as zero off the lattice.
    """

    def __init__(self, grid: SpatialGrid, window: float = 40.0, max_spacing: float = 0.25,
                 mu: float = 1.0, history_mask: np.ndarray | None = None, t_start: float = 1.0):
        self.grid = grid
        self.window = float(window)
        self.max_spacing = float(max_spacing)
        self.mu = float(mu)
        self.t_start = float(t_start)
        self.psi = np.zeros(grid.shape)
        self.buffer = _SnapshotRing(grid.shape)
        self.last_s: float | None = None
        self.inner = np.zeros(grid.shape)
        self.history_mask = history_mask
        self.history_t: list[float] = []
        self.history_psi: list[np.ndarray] = []
        self.history_weight: list[np.ndarray] = []
        centre = np.array([grid.n // 2] * grid.d, dtype=float).reshape((grid.d,) + (1,) * grid.d)
        self._centre = centre
        self._index = np.indices(grid.shape, dtype=float) - centre

    def _stretched(self, a2: np.ndarray, stretch: float) -> np.ndarray:
        if stretch == 1.0:
            return a2
        if self.grid.d == 1:
            xi = self.grid.xi_axis
            return np.interp(stretch * xi, xi, a2, left=0.0, right=0.0)
        coords = stretch * self._index + self._centre
        return map_coordinates(a2, coords, order=1, mode="constant", cval=0.0)

    def _stretched_rows(self, rows: np.ndarray, stretch: np.ndarray) -> np.ndarray:
        """Vectorised 1-D version of ``_stretched`` for a stack of snapshots."""
        n = self.grid.n
        pos = stretch[:, None] * (np.arange(n) - n // 2)[None, :] + n // 2
        i0 = np.floor(pos).astype(np.int64)
        frac = pos - i0
        inside = (pos >= 0) & (pos <= n - 1)
        i0c = np.clip(i0, 0, n - 1)
        i1c = np.clip(i0 + 1, 0, n - 1)
        lo = np.take_along_axis(rows, i0c, axis=1)
        hi = np.take_along_axis(rows, i1c, axis=1)
        # exact lattice hits at the last node need no right neighbour
        hi = np.where(i0 + 1 <= n - 1, hi, 0.0)
        return np.where(inside, lo + frac * (hi - lo), 0.0)

    def _inner(self, s: float) -> np.ndarray:
        if len(self.buffer) < 2:
            return np.zeros(self.grid.shape)
        times = self.buffer.times
        w = np.empty(times.size)
        gaps = np.diff(times)
        w[0] = 0.5 * gaps[0]
        w[-1] = 0.5 * gaps[-1]
        w[1:-1] = 0.5 * (gaps[:-1] + gaps[1:])
        w *= np.exp(-(s - times) / self.mu) / (2.0 * times * self.mu)
        if self.grid.d == 1:
            return w @ self._stretched_rows(self.buffer.rows, s / times)
        out = np.zeros(self.grid.shape)
        for wi, sp, a2 in zip(w, times, self.buffer.rows):
            out += wi * self._stretched(a2, s / sp)
        return out

    def update(self, snap: ProfileSnapshot) -> "PhaseAccumulator":
        s = float(snap.t)
        if snap.grid != self.grid:
            raise GridMismatchError("snapshot grid differs from accumulator grid")
        if self.last_s is None:
            if abs(s - self.t_start) > 1e-9:
                raise PhaseOrderError(f"first phase snapshot must be at t={self.t_start}, got {s}")
            s = self.t_start
        else:
            if s <= self.last_s:
                raise PhaseOrderError(f"snapshot at t={s} is not after t={self.last_s}")
            if s - self.last_s > self.max_spacing * (1 + 1e-9):
                raise PhaseOrderError(
                    f"snapshot spacing {s - self.last_s:.6g} exceeds the limit {self.max_spacing}"
                )
        a2 = np.abs(snap.f_hat.values) ** 2
        self.buffer.append(s, a2)
        self.buffer.prune(s - self.window)
        inner = self._inner(s)
        if self.last_s is not None:
            self.psi = self.psi + 0.5 * (s - self.last_s) * (self.inner + inner)
        self.inner = inner
        self.last_s = s
        if self.history_mask is not None:
            self.history_t.append(s)
            self.history_psi.append(self.psi[self.history_mask].copy())
            self.history_weight.append(a2[self.history_mask])
        return self


def phase_update(acc: PhaseAccumulator, snap: ProfileSnapshot) -> PhaseAccumulator:
    return acc.update(snap)


def phase_coupling(lam: int) -> float:
    """Factor turning the accumulated double integral into the d = 1 phase of the flow.

    With ``u_hat = int exp(-i xi x) u dx`` one has ``|u(s, x)|^2 ~ |f_hat(x/s)|^2 / (2 pi s)``,
    so the potential seen by frequency ``xi`` is ``(lam / pi)`` times the inner integral.
    """
    return lam / math.pi


def modified_profile(snap: ProfileSnapshot, acc: PhaseAccumulator, coupling: float = 1.0) -> ComplexField:
    """``exp(i * coupling * Psi) * f_hat``."""
    if acc.last_s is None or abs(snap.t - acc.last_s) > acc.max_spacing:
        raise PhaseOrderError(f"snapshot t={snap.t} does not match accumulator t={acc.last_s}")
    if snap.grid != acc.grid:
        raise GridMismatchError("snapshot grid differs from accumulator grid")
    return ComplexField(snap.grid, np.exp(1j * coupling * acc.psi) * snap.f_hat.values, SPECTRAL)


def log_phase_fit(psi_history, times, weight, band_fraction: float = 0.5) -> float:
    """Band-averaged ratio of the slope of Psi against log t to ``|f_hat|^2``.

    ``psi_history`` has shape ``(len(times), nfreq)``; ``weight`` is
    ``|f_hat(xi, t_last)|^2`` on the same frequencies. The band is where
    ``weight >= band_fraction * max(weight)``.
    """
    t = np.asarray(times, dtype=float)
    psi = np.asarray(psi_history, dtype=float).reshape(t.size, -1)
    weight = np.asarray(weight, dtype=float).ravel()
    if t.size < 10 or t.max() / t.min() < 10:
        raise ValueError("log_phase_fit needs >= 10 samples spanning a decade")
    if weight.max(initial=0.0) <= 0:
        return 0.0
    band = weight >= band_fraction * weight.max()
    logt = np.log(t)
    A = np.vstack([logt, np.ones_like(logt)]).T
    coef, *_ = np.linalg.lstsq(A, psi[:, band], rcond=None)
    return float(np.mean(coef[0] / weight[band]))
