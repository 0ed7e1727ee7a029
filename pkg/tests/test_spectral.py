import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdsim.checks import free_gaussian
from sdsim.spectral import (
    BoxEdgeWarning,
    ComplexField,
    DomainError,
    GridSizeError,
    RealField,
    boundary_mass_fraction,
    free_propagate,
    from_spectrum,
    gaussian,
    h1_norm,
    lp_norm,
    low_pass_filter,
    make_grid,
    moment_norm,
    to_spectrum,
)

# Closed forms for u = exp(-x^2/2) in d = 1 (frozen from the Gaussian moment integrals)
GAUSS_L2 = math.pi**0.25                          # 1.3313353638...
GAUSS_H1 = math.sqrt(1.5 * math.sqrt(math.pi))    # 1.6305459...
GAUSS_MOMENT = math.sqrt(math.sqrt(math.pi) / 2)  # 0.9413962...

small_grids = st.sampled_from([(1, 64, 10.0), (2, 16, 8.0), (3, 8, 6.0), (4, 8, 6.0)])


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return ComplexField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


# --- grids ---------------------------------------------------------------------


def test_grid_1d_lattice():
    g = make_grid(1, 8, 16.0)
    assert g.dx == 2.0
    np.testing.assert_allclose(g.xi_axis, 2 * np.pi * np.arange(-4, 4) / 16)
    np.testing.assert_allclose(g.x_axis, -8.0 + 2.0 * np.arange(8))


def test_grid_2d_counts():
    g = make_grid(2, 256, 64.0)
    assert g.size == 65536 and g.dx == 0.25


def test_grid_4d_within_default_budget():
    assert make_grid(4, 32, 16.0).size == 1_048_576


@pytest.mark.parametrize("n", [7, 100, 4, 12 * 5])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(GridSizeError):
        make_grid(1, n, 1.0)


def test_grid_accepts_three_times_power_of_two():
    assert make_grid(3, 96, 60.0).n == 96


def test_grid_memory_budget():
    with pytest.raises(GridSizeError, match="memory budget"):
        make_grid(3, 512, 10.0, max_points=1 << 24)


def test_lattice_symmetric_up_to_nyquist():
    xi = make_grid(1, 16, 2 * math.pi).xi_axis
    assert xi[0] == -8 and np.allclose(xi[1:], -xi[1:][::-1])


# --- transforms ----------------------------------------------------------------


def test_constant_spectrum_is_delta():
    g = make_grid(1, 32, 16.0)
    uh = to_spectrum(ComplexField(g, np.full(g.shape, 3.0))).values
    assert uh[16] == pytest.approx(3.0 * 16.0)
    assert np.max(np.abs(np.delete(uh, 16))) < 1e-12


def test_gaussian_fourier_pair():
    g = make_grid(1, 512, 32.0)
    uh = to_spectrum(ComplexField(g, gaussian(g))).values
    exact = math.sqrt(2 * math.pi) * np.exp(-g.xi_axis**2 / 2)
    assert np.max(np.abs(uh - exact)) <= 1e-8


def test_domain_tags_enforced():
    g = make_grid(1, 16, 4.0)
    f = ComplexField(g, np.ones(16))
    with pytest.raises(DomainError):
        from_spectrum(f)
    with pytest.raises(DomainError):
        to_spectrum(to_spectrum(f))


@settings(max_examples=25, deadline=None)
@given(small_grids, st.integers(0, 2**32 - 1))
def test_round_trip(spec, seed):
    g = make_grid(*spec)
    f = random_field(g, seed)
    back = from_spectrum(to_spectrum(f)).values
    assert np.max(np.abs(back - f.values)) <= 1e-12 * np.max(np.abs(f.values))


@settings(max_examples=25, deadline=None)
@given(small_grids, st.integers(0, 2**32 - 1))
def test_parseval(spec, seed):
    g = make_grid(*spec)
    f = random_field(g, seed)
    assert lp_norm(to_spectrum(f), 2) == pytest.approx(lp_norm(f, 2), rel=1e-10)


# --- free propagator -----------------------------------------------------------


def test_free_identity():
    g = make_grid(1, 64, 10.0)
    f = random_field(g, 0)
    assert np.array_equal(free_propagate(f, 0.0).values, f.values)


def test_free_sup_norm_at_unit_time():
    g = make_grid(1, 1024, 64.0)
    u = free_propagate(ComplexField(g, gaussian(g)), 1.0)
    assert lp_norm(u, math.inf) == pytest.approx(2**-0.25, abs=1e-6)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 3.0, 4.0, -2.0])
def test_free_gaussian_oracle_1d(t):
    g = make_grid(1, 1024, 64.0)
    u = free_propagate(ComplexField(g, gaussian(g)), t)
    assert np.max(np.abs(u.values - free_gaussian(g.x_axis, t))) <= 1e-8


def test_free_gaussian_oracle_2d():
    g = make_grid(2, 1024, 64.0)
    t = 4.0
    x, y = g.coords()
    exact = free_gaussian(x, t) * free_gaussian(y, t)
    u = free_propagate(ComplexField(g, gaussian(g)), t)
    assert np.max(np.abs(u.values - exact)) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(small_grids, st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_free_group_and_isometry(spec, seed, t1, t2):
    g = make_grid(*spec)
    f = random_field(g, seed)
    a = free_propagate(free_propagate(f, t1), t2).values
    b = free_propagate(f, t1 + t2).values
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(f.values)) * 10
    assert lp_norm(free_propagate(f, t1), 2) == pytest.approx(lp_norm(f, 2), rel=1e-12)


def test_free_spectral_domain_matches_physical():
    g = make_grid(1, 128, 20.0)
    f = random_field(g, 3)
    via_spec = from_spectrum(free_propagate(to_spectrum(f), 1.7)).values
    assert np.allclose(via_spec, free_propagate(f, 1.7).values, atol=1e-12)


# --- norms ---------------------------------------------------------------------


def test_lp_constant():
    g = make_grid(1, 64, 16.0)
    assert lp_norm(ComplexField(g, np.ones(64)), 2) == pytest.approx(4.0, rel=1e-14)


def test_gaussian_norms_closed_form():
    g = make_grid(1, 1024, 64.0)
    u = ComplexField(g, gaussian(g))
    assert lp_norm(u, math.inf) == 1.0
    assert lp_norm(u, 2) == pytest.approx(GAUSS_L2, abs=1e-8)
    assert h1_norm(u) == pytest.approx(GAUSS_H1, abs=1e-6)
    assert moment_norm(u) == pytest.approx(GAUSS_MOMENT, abs=1e-6)


def test_lp_rejects_small_p():
    g = make_grid(1, 16, 4.0)
    with pytest.raises(ValueError):
        lp_norm(ComplexField(g, np.ones(16)), 0.5)


@settings(max_examples=30, deadline=None)
@given(st.floats(1, 12) | st.just(math.inf), st.floats(-50, 50), st.integers(0, 1000))
def test_lp_homogeneous(p, c, seed):
    g = make_grid(1, 64, 10.0)
    f = random_field(g, seed)
    scaled = ComplexField(g, c * f.values)
    assert lp_norm(scaled, p) == pytest.approx(abs(c) * lp_norm(f, p), rel=1e-12, abs=1e-300)


def test_h1_zero():
    g = make_grid(2, 16, 8.0)
    assert h1_norm(ComplexField(g, np.zeros(g.shape))) == 0.0


@pytest.mark.parametrize("d", [1, 2, 3])
def test_h1_spectral_vs_physical(d):
    g = make_grid(d, {1: 256, 2: 64, 3: 32}[d], 16.0)
    u = ComplexField(g, gaussian(g, 1.0, 1.2, [0.7] * d))
    assert h1_norm(u) == pytest.approx(h1_norm(u, method="physical"), rel=1e-10)


def test_h1_real_field_accepted():
    g = make_grid(1, 256, 32.0)
    v = RealField(g, gaussian(g).real)
    assert h1_norm(v) == pytest.approx(GAUSS_H1, abs=1e-6)


def test_gradient_plane_wave_lower_bound():
    g = make_grid(1, 1024, 64.0)
    k = 3.0
    base = ComplexField(g, gaussian(g))
    wave = ComplexField(g, gaussian(g, k=[k]))
    grad_base = math.sqrt(h1_norm(base) ** 2 - lp_norm(base, 2) ** 2)
    grad_wave = math.sqrt(h1_norm(wave) ** 2 - lp_norm(wave, 2) ** 2)
    assert grad_wave >= k * lp_norm(base, 2) - grad_base


def test_moment_zero_field():
    g = make_grid(1, 64, 16.0)
    assert moment_norm(ComplexField(g, np.zeros(64))) == 0.0


@pytest.mark.parametrize("a", [0.5, 2.0, 4.0])
def test_moment_parallel_axis(a):
    g = make_grid(1, 1024, 64.0)
    shifted = ComplexField(g, np.exp(-((g.x_axis - a) ** 2) / 2))
    expect = GAUSS_MOMENT**2 + a**2 * GAUSS_L2**2
    assert moment_norm(shifted) ** 2 == pytest.approx(expect, rel=1e-10)


def test_moment_warns_on_edge_mass():
    g = make_grid(1, 64, 16.0)
    with pytest.warns(BoxEdgeWarning):
        moment_norm(ComplexField(g, np.ones(64)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        moment_norm(ComplexField(make_grid(1, 512, 64.0), gaussian(make_grid(1, 512, 64.0))))


def test_boundary_fraction_of_constant_is_shell_share():
    g = make_grid(1, 128, 10.0)
    assert boundary_mass_fraction(ComplexField(g, np.ones(128)), 0.1) == pytest.approx(0.2, rel=1e-12)


# --- filter --------------------------------------------------------------------


def test_filter_identity_and_projection():
    g = make_grid(2, 32, 8.0)
    fh = to_spectrum(random_field(g, 5))
    assert low_pass_filter(fh, 1.0) is fh
    once = low_pass_filter(fh, 2 / 3)
    twice = low_pass_filter(once, 2 / 3)
    assert np.array_equal(once.values, twice.values)


def test_filter_energy_is_kept_modes():
    g = make_grid(1, 256, 16.0)
    fh = to_spectrum(random_field(g, 9))
    kept = low_pass_filter(fh, 2 / 3)
    mask = np.abs(g.k_axis) <= (2 / 3) * 128
    energy = np.sum(np.abs(fh.values[mask]) ** 2) * g.freq_cell_volume
    assert lp_norm(kept, 2) ** 2 == pytest.approx(energy, rel=1e-14)
