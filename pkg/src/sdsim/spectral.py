"""Periodic-box grids, Fourier transforms, the free Schrodinger group and spatial norms.

Convention: ``u_hat(xi) = int exp(-i xi.x) u(x) dx``, so the free flow
``S(t) = exp(i t Laplacian / 2)`` acts on the spectrum as ``exp(-i |xi|^2 t / 2)``.
Transforms carry the physical measure (``dx**d`` forward, ``(dxi / 2pi)**d``
inverse) so that discrete norms approximate the continuum integrals.

Spectral arrays are stored in centred order: index ``j`` on each axis holds the
wavenumber ``k = j - n/2``, i.e. ``k`` runs over ``[-n/2, n/2)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from . import fft

PHYSICAL = "physical"
SPECTRAL = "spectral"

DEFAULT_MAX_POINTS = 1 << 24
EDGE_SHELL = 0.1
EDGE_MASS_TOL = 1e-6


class GridSizeError(ValueError):
    pass


class DomainError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


class BoxEdgeWarning(RuntimeWarning):
    """Moment computed for a field with non-negligible mass near the box edge."""


@dataclass(frozen=True)
class SpatialGrid:
    d: int
    n: int
    L: float

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def dxi(self) -> float:
        return 2.0 * math.pi / self.L

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def freq_cell_volume(self) -> float:
        """Frequency-side measure ``(dxi / 2pi)**d`` used by the inverse transform."""
        return (self.dxi / (2.0 * math.pi)) ** self.d

    @property
    def x_axis(self) -> np.ndarray:
        return -0.5 * self.L + self.dx * np.arange(self.n)

    @property
    def k_axis(self) -> np.ndarray:
        return np.arange(-(self.n // 2), self.n // 2)

    @property
    def xi_axis(self) -> np.ndarray:
        return self.dxi * self.k_axis

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        return _open_mesh(self.x_axis, self.d)

    def frequencies(self) -> list[np.ndarray]:
        """Broadcastable centred frequency arrays, one per axis."""
        return _open_mesh(self.xi_axis, self.d)

    def radius_sq(self) -> np.ndarray:
        return _radius_sq(self)

    def xi_sq(self) -> np.ndarray:
        """|xi|^2 in centred order."""
        return _xi_sq_centred(self)


def _open_mesh(axis: np.ndarray, d: int) -> list[np.ndarray]:
    out = []
    for i in range(d):
        shape = [1] * d
        shape[i] = axis.size
        out.append(axis.reshape(shape))
    return out


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def fft_friendly(n: int) -> bool:
    """Powers of two, plus three times a power of two (e.g. 96)."""
    return _is_pow2(n) or (n % 3 == 0 and _is_pow2(n // 3))


def make_grid(d: int, n: int, L: float, max_points: int = DEFAULT_MAX_POINTS) -> SpatialGrid:
    if d not in (1, 2, 3, 4):
        raise ValueError(f"dimension must be 1..4, got {d}")
    if int(n) != n or not fft_friendly(int(n)) or n < 8:
        raise GridSizeError(f"points per axis must be a power of two (or 3 times one) >= 8, got {n}")
    if not (L > 0 and math.isfinite(L)):
        raise ValueError(f"box length must be positive, got {L}")
    n = int(n)
    if n**d > max_points:
        raise GridSizeError(
            f"grid {n}^{d} = {n**d} points exceeds the memory budget of {max_points} points"
        )
    return SpatialGrid(d=int(d), n=n, L=float(L))


# --- cached per-grid arrays (lru_cache is safe to share between threads) -----


@lru_cache(maxsize=32)
def _radius_sq(grid: SpatialGrid) -> np.ndarray:
    r2 = sum(c**2 for c in grid.coords())
    return np.broadcast_to(r2, grid.shape).copy()


@lru_cache(maxsize=32)
def _xi_sq_centred(grid: SpatialGrid) -> np.ndarray:
    k2 = sum(c**2 for c in grid.frequencies())
    out = np.broadcast_to(k2, grid.shape).copy()
    out.flags.writeable = False
    return out


@lru_cache(maxsize=32)
def xi_sq_fft_order(grid: SpatialGrid) -> np.ndarray:
    """|xi|^2 in the unshifted FFT ordering used by the time steppers."""
    axis = grid.dxi * fft.fftfreq(grid.n, 1.0 / grid.n)
    k2 = sum(c**2 for c in _open_mesh(axis, grid.d))
    out = np.broadcast_to(k2, grid.shape).copy()
    out.flags.writeable = False
    return out


@lru_cache(maxsize=32)
def _shell_weights(grid: SpatialGrid, shell: float) -> np.ndarray:
    # fraction of each cell [x - dx/2, x + dx/2] lying in the torus region |x| >= L/2 - shell*L
    a = 0.5 * grid.L - shell * grid.L
    x = grid.x_axis
    lo, hi = x - 0.5 * grid.dx, x + 0.5 * grid.dx
    inner = np.clip(np.minimum(hi, a) - np.maximum(lo, -a), 0.0, None)
    w_axis = 1.0 - inner / grid.dx
    keep = np.ones(grid.shape)
    for w in _open_mesh(w_axis, grid.d):
        keep = keep * (1.0 - w)
    return 1.0 - keep


# --- fields ----------------------------------------------------------------


def _frozen(arr: np.ndarray) -> np.ndarray:
    view = arr.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: SpatialGrid
    values: np.ndarray
    domain: str = PHYSICAL

    def __post_init__(self):
        if self.domain not in (PHYSICAL, SPECTRAL):
            raise DomainError(f"unknown domain tag {self.domain!r}")
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.size != self.grid.size:
            raise ValueError(f"field has {vals.size} samples, grid has {self.grid.size}")
        object.__setattr__(self, "values", _frozen(vals.reshape(self.grid.shape)))


@dataclass(frozen=True, eq=False)
class RealField:
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if np.iscomplexobj(vals):
            if np.any(vals.imag != 0):
                raise ValueError("RealField values must be real")
            vals = vals.real
        vals = np.asarray(vals, dtype=np.float64)
        if vals.size != self.grid.size:
            raise ValueError(f"field has {vals.size} samples, grid has {self.grid.size}")
        object.__setattr__(self, "values", _frozen(vals.reshape(self.grid.shape)))


def _require(field, domain: str):
    tag = getattr(field, "domain", PHYSICAL)
    if tag != domain:
        raise DomainError(f"expected a {domain} field, got {tag}")


def same_grid(a: SpatialGrid, b: SpatialGrid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


# --- transforms ------------------------------------------------------------


def spectrum_array(grid: SpatialGrid, values: np.ndarray, workers=None) -> np.ndarray:
    """Centred spectrum of a physical array (the ``ifftshift`` moves x = 0 to index 0)."""
    out = fft.fftn(fft.ifftshift(values), workers=workers)
    return fft.fftshift(out) * grid.cell_volume


def physical_array(grid: SpatialGrid, values: np.ndarray, workers=None) -> np.ndarray:
    out = fft.ifftn(fft.ifftshift(values), workers=workers)
    return fft.fftshift(out) / grid.cell_volume


def to_spectrum(f: ComplexField | RealField, workers=None) -> ComplexField:
    _require(f, PHYSICAL)
    return ComplexField(f.grid, spectrum_array(f.grid, f.values, workers), SPECTRAL)


def from_spectrum(f: ComplexField, workers=None) -> ComplexField:
    _require(f, SPECTRAL)
    return ComplexField(f.grid, physical_array(f.grid, f.values, workers), PHYSICAL)


def free_multiplier(grid: SpatialGrid, tau: float, order: str = "centred") -> np.ndarray:
    xi2 = grid.xi_sq() if order == "centred" else xi_sq_fft_order(grid)
    return np.exp(-0.5j * tau * xi2)


def free_propagate(u: ComplexField, tau: float, workers=None) -> ComplexField:
    """Exact free Schrodinger evolution ``S(tau) u``; keeps the domain tag of ``u``."""
    if u.domain == SPECTRAL:
        return ComplexField(u.grid, u.values * free_multiplier(u.grid, tau), SPECTRAL)
    if tau == 0:
        return u
    uh = fft.fftn(u.values, workers=workers)
    uh *= free_multiplier(u.grid, tau, order="fft")
    return ComplexField(u.grid, fft.ifftn(uh, workers=workers), PHYSICAL)


# --- norms -----------------------------------------------------------------


def _lp(values: np.ndarray, p: float, weight: float) -> float:
    a = np.abs(values)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p == 2:
        return math.sqrt(float(np.vdot(a, a).real) * weight)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0
    # scale first so a**p neither underflows nor overflows
    return top * float((np.sum((a / top) ** p) * weight) ** (1.0 / p))


def lp_norm(f: ComplexField | RealField, p: float) -> float:
    """Quadrature L^p norm; spectral fields use the frequency measure ``(dxi/2pi)^d``."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if getattr(f, "domain", PHYSICAL) == SPECTRAL:
        return _lp(f.values, p, f.grid.freq_cell_volume)
    return _lp(f.values, p, f.grid.cell_volume)


def spectral_l2(values: np.ndarray, grid: SpatialGrid) -> float:
    return _lp(values, 2, grid.freq_cell_volume)


def gradient(f: ComplexField | RealField, workers=None) -> list[np.ndarray]:
    """Spectral gradient ``i xi f_hat`` mapped back to physical space, one array per axis."""
    _require(f, PHYSICAL)
    fh = fft.fftn(f.values, workers=workers)
    axis = f.grid.dxi * fft.fftfreq(f.grid.n, 1.0 / f.grid.n)
    out = []
    for xi in _open_mesh(axis, f.grid.d):
        g = fft.ifftn(1j * xi * fh, workers=workers)
        out.append(g.real if isinstance(f, RealField) else g)
    return out


def h1_norm(u: ComplexField | RealField, method: str = "spectral", workers=None) -> float:
    """``(||u||_2^2 + ||grad u||_2^2)^(1/2)``."""
    if method == "spectral":
        if getattr(u, "domain", PHYSICAL) == SPECTRAL:
            uh = u.values
        else:
            uh = spectrum_array(u.grid, u.values, workers)
        a2 = uh.real**2 + uh.imag**2
        return math.sqrt(float(np.sum((1.0 + u.grid.xi_sq()) * a2)) * u.grid.freq_cell_volume)
    if method == "physical":
        total = lp_norm(u, 2) ** 2
        for g in gradient(u, workers):
            total += _lp(g, 2, u.grid.cell_volume) ** 2
        return math.sqrt(total)
    raise ValueError(f"unknown method {method!r}")


def boundary_mass_fraction(u: ComplexField | RealField, shell: float = EDGE_SHELL) -> float:
    """Fraction of ``||u||_2^2`` within ``shell * L`` of the box boundary on any axis."""
    if not 0 < shell < 0.5:
        raise ValueError(f"shell must lie in (0, 0.5), got {shell}")
    a2 = np.abs(u.values) ** 2
    total = float(a2.sum())
    if total == 0:
        return 0.0
    return float(np.sum(_shell_weights(u.grid, float(shell)) * a2)) / total


def moment_norm(f: ComplexField) -> float:
    """``|| |x| f ||_2``; warns when the box edge carries enough mass to dominate it."""
    _require(f, PHYSICAL)
    a2 = np.abs(f.values) ** 2
    if a2.any() and boundary_mass_fraction(f, EDGE_SHELL) > EDGE_MASS_TOL:
        warnings.warn(
            "more than 1e-6 of the mass lies in the outer 10% shell; moment is box-dominated",
            BoxEdgeWarning,
            stacklevel=2,
        )
    return math.sqrt(float(np.sum(f.grid.radius_sq() * a2)) * f.grid.cell_volume)


def sigma_norm(u: ComplexField) -> float:
    return h1_norm(u) + moment_norm(u)


def low_pass_mask(grid: SpatialGrid, keep_fraction: float) -> np.ndarray:
    """Boolean mask (centred order) of modes with every ``|k| <= keep_fraction * n / 2``."""
    if not 0 < keep_fraction <= 1:
        raise ValueError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    ok_axis = np.abs(grid.k_axis) <= keep_fraction * grid.n / 2
    mask = np.ones(grid.shape, dtype=bool)
    for ok in _open_mesh(ok_axis, grid.d):
        mask = mask & ok
    return mask


def low_pass_filter(u: ComplexField, keep_fraction: float) -> ComplexField:
    _require(u, SPECTRAL)
    if keep_fraction == 1:
        return u
    return ComplexField(u.grid, np.where(low_pass_mask(u.grid, keep_fraction), u.values, 0), SPECTRAL)


def gaussian(grid: SpatialGrid, amplitude: float = 1.0, sigma: float = 1.0, k=None) -> np.ndarray:
    """``A exp(-|x|^2 / (2 sigma^2)) exp(i k.x)`` sampled on the grid."""
    g = amplitude * np.exp(-grid.radius_sq() / (2.0 * sigma**2))
    if k is not None and any(kk != 0 for kk in k):
        phase = sum(kk * c for kk, c in zip(k, grid.coords()))
        return g * np.exp(1j * phase)
    return g.astype(np.complex128)
