import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdsim.diagnostics import NormSeries
from sdsim.dynamics import DebyeParams, SystemState
from sdsim.experiments import fit_decay
from sdsim.io import (
    RunManifest,
    SnapshotFormatError,
    emit_plot_data,
    read_csv,
    read_snapshot,
    write_csv,
    write_snapshot,
)
from sdsim.spectral import make_grid


def random_state(d, n, seed, t=0.0):
    grid = make_grid(d, n, 7.5)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return SystemState.from_arrays(grid, u, rng.standard_normal(grid.shape), t)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(1, 16), (2, 8), (3, 8), (4, 8)]), st.integers(0, 2**31), st.floats(0, 1e3),
       st.floats(1e-3, 1e3), st.sampled_from([-1, 1]))
def test_snapshot_bitwise_round_trip(tmp_path_factory, shape, seed, t, mu, lam):
    state = random_state(*shape, seed, t)
    path = tmp_path_factory.mktemp("s") / "x.sdbf"
    write_snapshot(state, DebyeParams(mu, lam), path)
    back, params = read_snapshot(path)
    assert back.u.values.tobytes() == state.u.values.tobytes()
    assert back.v.values.tobytes() == state.v.values.tobytes()
    assert back.t == t and params.mu == mu and params.lam == lam
    assert back.u.grid.n == shape[1] and back.u.grid.L == 7.5


def test_snapshot_payload_alignment(tmp_path):
    state = random_state(1, 16, 0)
    path = write_snapshot(state, DebyeParams(1.0, 1), tmp_path / "a.sdbf")
    header = 4 + 8 + 4 + 8 + 17
    header += -header % 8
    assert path.stat().st_size == header + 16 * 16 + 8 * 16


@pytest.mark.parametrize("mutate,needle", [
    (lambda b: b"XXXX" + b[4:], "bad magic"),
    (lambda b: b[:4] + (2).to_bytes(4, "little") + b[8:], "unsupported version"),
    (lambda b: b[:-8], "truncated"),
    (lambda b: b + b"\0" * 8, "oversized"),
    (lambda b: b[:10], "truncated header"),
])
def test_snapshot_rejects_corruption(tmp_path, mutate, needle):
    path = write_snapshot(random_state(2, 8, 1), DebyeParams(1.0, -1), tmp_path / "a.sdbf")
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(SnapshotFormatError, match=needle):
        read_snapshot(path)


def test_csv_empty_series_is_header_only(tmp_path):
    path = write_csv(NormSeries(2, (4.0, 3.0)), tmp_path / "n.csv")
    lines = path.read_text().splitlines()
    assert lines == ["t,l2_u,h1_u,linf_u,lp_u_4,lp_u_3,l2_v,h1_v,xnorm_f,gamma_l2,boundary_mass_fraction"]


@pytest.mark.parametrize("p_list", [(), (4.0,), (3.0, 4.0, 5.0)])
def test_csv_column_count(tmp_path, p_list):
    s = NormSeries(1, p_list)
    s.append(0.0, l2_u=1.0)
    s.append(0.5, l2_u=0.9)
    rows = write_csv(s, tmp_path / "n.csv").read_text().splitlines()
    assert len(rows) == 3
    assert all(len(r.split(",")) == 1 + 8 + len(p_list) for r in rows)


def test_csv_missing_values_are_empty(tmp_path):
    s = NormSeries(1, (4.0,))
    s.append(1.0, l2_u=0.0, lp_u_4=2.5)
    path = write_csv(s, tmp_path / "n.csv")
    row = path.read_text().splitlines()[1].split(",")
    assert row[:2] == ["1.0", "0.0"] and row[2] == "" and row[4] == "2.5"
    back = read_csv(path, d=1)
    assert back.channels["h1_u"] == [None] and back.channels["lp_u_4"] == [2.5]


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(3)
    s = NormSeries(3, (4.0,))
    for t in np.linspace(0, 1, 11):
        s.append(t, **{c: rng.random() for c in s.columns()[1:]})
    back = read_csv(write_csv(s, tmp_path / "n.csv"), d=3)
    assert back.times == s.times and back.channels == s.channels


def test_plot_data_fit_line(tmp_path):
    t = np.linspace(2, 30, 30)
    s = NormSeries(2, (4.0,))
    for ti in t:
        s.append(ti, lp_u_4=1.7 * ti**-0.5 * (1 + 0.01 * np.sin(ti)))
    fit = fit_decay(s, 4.0, (2.0, None))
    paths = emit_plot_data([fit], tmp_path / "plot")
    assert [p.name for p in paths] == ["decay_p4.dat", "decay_p4_fit.dat"]
    data, line = (np.loadtxt(p) for p in paths)
    assert data.shape == (30, 2) and np.array_equal(data[:, 0], np.log(t))
    assert np.allclose(data[:, 1], np.log(s.channel("lp_u_4")), atol=1e-12)
    assert np.max(np.abs(line[:, 1] - (fit.intercept + fit.exponent * line[:, 0]))) <= 1e-9


def test_manifest_round_trip(tmp_path):
    m = RunManifest("abc", "0.1.0", "numpy", "2026-01-01T00:00:00", outputs=["norms.csv"],
                    wrap_guard_time=math.inf, exit_code=0, complete=True)
    back = RunManifest.read(m.write(tmp_path / "manifest.json"))
    assert back == m
