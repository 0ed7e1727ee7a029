import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from sdsim.diagnostics import (
    MissingChannelError,
    NormSeries,
    PhaseAccumulator,
    PhaseOrderError,
    ProfileSnapshot,
    gamma_norm,
    gamma_norm_pseudoconformal,
    log_phase_fit,
    modified_profile,
    phase_update,
    profile,
    scattering_residual,
    strichartz_norm,
    wrap_guard_time,
    y_norm,
)
from sdsim.experiments import smooth_scenario
from sdsim.runner import simulate
from sdsim.spectral import (
    ComplexField,
    GridMismatchError,
    boundary_mass_fraction,
    free_propagate,
    gaussian,
    lp_norm,
    make_grid,
    to_spectrum,
)

GAUSS_MOMENT = math.sqrt(math.sqrt(math.pi) / 2)


def psi_oracle(t_end, mu=1.0, amp2=1.0, window=math.inf):
    """Scalar double integral of the phase for a constant |f_hat|^2 = amp2."""
    def inner(s):
        lo = max(1.0, s - window)
        return integrate.quad(lambda r: math.exp(-(s - r) / mu) / (2 * r * mu), lo, s,
                              epsabs=1e-15, epsrel=1e-13)[0]
    return amp2 * integrate.quad(inner, 1.0, t_end, epsabs=1e-15, epsrel=1e-13, limit=200)[0]


def flat_snapshot(grid, t, amp=1.0):
    return ProfileSnapshot(t, ComplexField(grid, np.full(grid.shape, amp, complex), "spectral"))


def run_accumulator(acc, profiles, t_end, h):
    for k in range(int(round((t_end - 1) / h)) + 1):
        t = 1 + k * h
        acc.update(ProfileSnapshot(t, profiles(t)))
    return acc


# --- profiles ------------------------------------------------------------------


def test_profile_at_zero_is_spectrum():
    g = make_grid(1, 128, 16.0)
    u = ComplexField(g, gaussian(g, k=[1.0]))
    assert np.array_equal(profile(u, 0.0).f_hat.values, to_spectrum(u).values)


@pytest.mark.parametrize("t", [0.5, 3.0, 10.0])
def test_profile_isometry_and_linear_constancy(t):
    g = make_grid(2, 64, 24.0)
    u0 = ComplexField(g, gaussian(g, 1.0, 1.0, [0.5, -0.3]))
    f0 = profile(u0, 0.0)
    ft = profile(free_propagate(u0, t), t)
    assert lp_norm(ft.f_hat, 2) == pytest.approx(lp_norm(u0, 2), rel=1e-10)
    assert scattering_residual(f0, ft) <= 1e-10


def test_residual_properties():
    g = make_grid(1, 64, 16.0)
    rng = np.random.default_rng(0)
    snaps = [ProfileSnapshot(float(i), ComplexField(g, rng.standard_normal(64) + 0j, "spectral")) for i in range(3)]
    a, b, c = snaps
    assert scattering_residual(a, a) == 0
    assert scattering_residual(a, b) == scattering_residual(b, a)
    assert scattering_residual(a, c) <= scattering_residual(a, b) + scattering_residual(b, c) + 1e-15
    with pytest.raises(GridMismatchError):
        scattering_residual(a, flat_snapshot(make_grid(1, 32, 16.0), 0.0))


def test_profile_rejects_negative_time():
    g = make_grid(1, 16, 4.0)
    with pytest.raises(ValueError):
        profile(ComplexField(g, np.ones(16)), -1.0)


# --- Gamma -------------------------------------------------------------------------


def test_gamma_at_zero_is_moment():
    g = make_grid(1, 1024, 64.0)
    assert gamma_norm(ComplexField(g, gaussian(g)), 0.0) == pytest.approx(GAUSS_MOMENT, abs=1e-6)


def test_gamma_constant_on_free_flow():
    g = make_grid(1, 2048, 128.0)
    u0 = ComplexField(g, gaussian(g, 1.0, 1.0, [0.4]))
    ref = gamma_norm(u0, 0.0)
    for t in (1.0, 5.0, 10.0):
        assert gamma_norm(free_propagate(u0, t), t) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("t", [1.0, 2.0, 4.0])
def test_gamma_pseudoconformal_cross_check(t):
    g = make_grid(1, 1024, 64.0)
    u = free_propagate(ComplexField(g, gaussian(g)), t)
    assert gamma_norm_pseudoconformal(u, t) == pytest.approx(gamma_norm(u, t), rel=1e-8)


# --- Strichartz and Y norms -----------------------------------------------------------


def series_from(t, **channels):
    s = NormSeries(3, (4.0,))
    for i, ti in enumerate(t):
        s.append(ti, **{k: v[i] for k, v in channels.items()})
    return s


@pytest.mark.parametrize("q", [1.0, 2.0, 8 / 3, 4.0])
def test_strichartz_constant_channel(q):
    t = np.linspace(0, 5.0, 11)
    s = series_from(t, lp_u_4=np.full(11, 0.3))
    assert strichartz_norm(s, q, 4.0) == pytest.approx(0.3 * 5.0 ** (1 / q), rel=1e-12)


def test_strichartz_sup():
    t = np.linspace(1, 3, 5)
    s = series_from(t, lp_u_4=np.array([0.1, 0.5, 0.2, 0.3, 0.05]))
    assert strichartz_norm(s, math.inf, 4.0) == 0.5


def test_strichartz_power_law_oracle():
    t = np.linspace(1.0, 16.0, 3001)
    s = series_from(t, lp_u_4=t**-0.75)
    assert strichartz_norm(s, 8 / 3, 4.0) == pytest.approx((15 / 16) ** (3 / 8), abs=1e-4)


def test_strichartz_monotone_in_range():
    t = np.linspace(0, 10, 101)
    s = series_from(t, lp_u_4=np.exp(-t) + 0.1)
    vals = [strichartz_norm(s, 2.0, 4.0, (0.0, hi)) for hi in (1, 3, 6, 10)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_strichartz_missing_channel():
    s = series_from([1.0, 2.0], lp_u_4=[1.0, 1.0])
    with pytest.raises(MissingChannelError):
        strichartz_norm(s, 2.0, 6.0)


def test_y_norm_trivial_cases():
    s = series_from([1.0, 2.0], linf_u=[0, 0], h1_u=[0, 0], xnorm_f=[0, 0], l2_u=[0, 0])
    assert y_norm(s, 0.1) == 0
    s = series_from([1.0], linf_u=[0.2], h1_u=[1.5], xnorm_f=[0.9], l2_u=[1.1])
    assert y_norm(s, 0.1) == pytest.approx(0.2 + 1.5 + 0.9 + 1.1)


def test_y_norm_rejects_bad_inputs():
    s = series_from([0.5, 1.0], linf_u=[1, 1], h1_u=[1, 1], xnorm_f=[1, 1], l2_u=[1, 1])
    with pytest.raises(ValueError):
        y_norm(s, 0.1)
    with pytest.raises(ValueError):
        y_norm(s, 0.2)


def test_series_columns_and_order():
    s = NormSeries(2, (4.0, 6.0))
    assert s.columns() == ["t", "l2_u", "h1_u", "linf_u", "lp_u_4", "lp_u_6",
                           "l2_v", "h1_v", "xnorm_f", "gamma_l2", "boundary_mass_fraction"]
    s.append(1.0, l2_u=1.0)
    with pytest.raises(ValueError):
        s.append(1.0, l2_u=1.0)
    with pytest.raises(MissingChannelError):
        s.append(2.0, bogus=1.0)
    assert math.isnan(s.channel("h1_u")[0])


# --- wrap guard ----------------------------------------------------------------------


def test_boundary_fraction_narrow_gaussian():
    g = make_grid(1, 1024, 64.0)
    assert boundary_mass_fraction(ComplexField(g, gaussian(g)), 0.1) <= 1e-12


def test_wrap_guard_definition():
    s = series_from([1, 2, 3, 4], boundary_mass_fraction=[0, 1e-8, 2e-6, 1e-7])
    assert wrap_guard_time(s) == 2.0
    s = series_from([1, 2], boundary_mass_fraction=[0, 0])
    assert wrap_guard_time(s) == 2.0


# --- the phase accumulator -------------------------------------------------------------


def test_phase_zero_profile():
    g = make_grid(1, 32, 8.0)
    acc = run_accumulator(PhaseAccumulator(g), lambda t: flat_snapshot(g, t, 0.0).f_hat, 5.0, 0.25)
    assert not acc.psi.any()


def test_phase_constant_profile_vs_quadrature():
    g = make_grid(1, 16, 16.0)
    acc = run_accumulator(PhaseAccumulator(g, 40.0, 0.005), lambda t: flat_snapshot(g, t).f_hat, 3.0, 0.005)
    assert abs(acc.psi[8] - psi_oracle(3.0)) <= 1e-6


@pytest.mark.parametrize("mu", [0.5, 2.0])
def test_phase_constant_profile_general_mu(mu):
    g = make_grid(1, 16, 16.0)
    acc = run_accumulator(PhaseAccumulator(g, 40.0, 0.005, mu), lambda t: flat_snapshot(g, t, 0.7).f_hat, 2.5, 0.005)
    assert abs(acc.psi[8] - psi_oracle(2.5, mu, 0.49)) <= 1e-6


def test_phase_windowed_matches_full_short_horizon():
    g = make_grid(1, 64, 32.0)
    f = lambda t: ComplexField(g, gaussian(g, 1.0, 1.0 + 0.05 * t), "spectral")
    full = run_accumulator(PhaseAccumulator(g, math.inf), f, 20.0, 0.25)
    win = run_accumulator(PhaseAccumulator(g, 40.0), f, 20.0, 0.25)
    assert np.max(np.abs(win.psi - full.psi)) <= 1e-10 * np.max(np.abs(full.psi))


@pytest.mark.parametrize("window", [3.0, 6.0])
def test_phase_truncation_bound(window):
    g = make_grid(1, 64, 32.0)
    f = lambda t: ComplexField(g, gaussian(g, 1.0, 1.0 + 0.05 * t), "spectral")
    t_end = 20.0
    full = run_accumulator(PhaseAccumulator(g, math.inf), f, t_end, 0.25)
    win = run_accumulator(PhaseAccumulator(g, window), f, t_end, 0.25)
    # |f_hat|^2 <= 1 here and the dropped kernel mass is at most exp(-W + spacing) / 2
    bound = 0.5 * math.exp(-window + 0.25) * (t_end - 1)
    gap = np.max(np.abs(win.psi - full.psi))
    assert 0 < gap <= bound


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0.0, 2.0), min_size=8, max_size=8), st.floats(0.3, 3.0))
def test_phase_nondecreasing(amps, mu):
    g = make_grid(1, 16, 8.0)
    rng_amps = np.array(amps)
    acc = PhaseAccumulator(g, 40.0, 0.25, mu)
    prev = np.zeros(g.shape)
    for k in range(25):
        a = rng_amps[k % 8] * np.exp(-np.abs(g.xi_axis) * (1 + 0.1 * k))
        acc.update(ProfileSnapshot(1 + 0.25 * k, ComplexField(g, a + 0j, "spectral")))
        assert np.all(acc.psi >= prev - 1e-15) and np.all(np.isfinite(acc.psi))
        prev = acc.psi.copy()


def test_phase_order_and_spacing_errors():
    g = make_grid(1, 16, 8.0)
    acc = PhaseAccumulator(g, 40.0, 0.25)
    with pytest.raises(PhaseOrderError):
        acc.update(flat_snapshot(g, 2.0))
    phase_update(acc, flat_snapshot(g, 1.0))
    with pytest.raises(PhaseOrderError):
        acc.update(flat_snapshot(g, 1.0))
    with pytest.raises(PhaseOrderError):
        acc.update(flat_snapshot(g, 1.5))
    with pytest.raises(GridMismatchError):
        acc.update(flat_snapshot(make_grid(1, 32, 8.0), 1.25))


def test_phase_buffer_spans_window():
    g = make_grid(1, 16, 8.0)
    acc = run_accumulator(PhaseAccumulator(g, 5.0, 0.25), lambda t: flat_snapshot(g, t).f_hat, 20.0, 0.25)
    times = acc.buffer.times
    assert np.all(np.diff(times) > 0)
    assert times[-1] - times[1] < 5.0 and times[-1] - times[0] >= 5.0


def test_modified_profile_modulus_and_identity():
    g = make_grid(1, 64, 16.0)
    rng = np.random.default_rng(1)
    fh = ComplexField(g, rng.standard_normal(64) + 1j * rng.standard_normal(64), "spectral")
    acc = PhaseAccumulator(g)
    acc.update(ProfileSnapshot(1.0, fh))
    assert np.array_equal(modified_profile(ProfileSnapshot(1.0, fh), acc).values, fh.values)  # Psi = 0 at t = 1
    acc.update(ProfileSnapshot(1.25, fh))
    mod = modified_profile(ProfileSnapshot(1.25, fh), acc, coupling=3.0)
    assert np.max(np.abs(np.abs(mod.values) - np.abs(fh.values))) <= 1e-14
    with pytest.raises(PhaseOrderError):
        modified_profile(ProfileSnapshot(3.0, fh), acc)


# --- log-coefficient fit ----------------------------------------------------------------


def test_log_phase_fit_constant_profile_half():
    g = make_grid(1, 16, 16.0)
    acc = PhaseAccumulator(g, 20.0, 0.05, history_mask=np.ones(16, bool))
    run_accumulator(acc, lambda t: flat_snapshot(g, t).f_hat, 2000.0, 0.05)
    t = np.array(acc.history_t)
    keep = (t >= 200) & (t <= 2000)
    psi = np.array(acc.history_psi)[keep]
    # edge frequencies stretch off the lattice, so weight the interior only
    weight = (np.abs(g.k_axis) <= 2).astype(float)
    assert log_phase_fit(psi, t[keep], weight) == pytest.approx(0.5, abs=1e-3)


def test_log_phase_fit_zero_and_span():
    t = np.geomspace(1, 100, 20)
    assert log_phase_fit(np.zeros((20, 4)), t, np.zeros(4)) == 0.0
    with pytest.raises(ValueError):
        log_phase_fit(np.zeros((5, 4)), t[:5], np.ones(4))
    with pytest.raises(ValueError):
        log_phase_fit(np.zeros((20, 4)), np.linspace(1, 5, 20), np.ones(4))


def test_log_phase_fit_exact_log():
    t = np.geomspace(2, 200, 30)
    w = np.array([1.0, 2.0, 0.1])
    psi = 0.37 * np.outer(np.log(t), w) + 4.0
    # the band (weight >= half the peak) keeps the first two columns
    assert log_phase_fit(psi, t, w) == pytest.approx(0.37, rel=1e-12)


# --- runner-level nullity on a linear flow ------------------------------------------------


def test_linear_run_nullity():
    cfg = smooth_scenario(
        step={"linear": True, "dt": 0.25, "t_end": 6.0, "output_stride": 1},
        initial={"v_amplitude": 0.0, "u_amplitude": 0.5},
        diagnostics={"phase": True, "gamma": True, "profile_times": (2.0, 4.0), "p_list": (4.0,)},
        grid={"n": 2048, "L": 128.0},
    )
    traj = simulate(cfg)
    assert scattering_residual(traj.profiles[2.0], traj.profiles[4.0]) <= 1e-8
    for t in (2.0, 4.0):
        assert np.max(np.abs(traj.modified[t].values - traj.profiles[t].f_hat.values)) <= 1e-8
    gam = traj.series.channel("gamma_l2")
    assert np.max(np.abs(gam - gam[0])) <= 1e-8 * gam[0]
