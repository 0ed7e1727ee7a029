"""On-disk formats: SDBF state snapshots, norms.csv, plot data and the run manifest.

SDBF layout (little-endian): magic ``b"SDBF"``, version u32 = 1, d u32,
n u32[d], L f64[d], t f64, mu f64, lambda i8, zero padding to an 8-byte
boundary, then u as interleaved (re, im) f64 in row-major order, then v as f64.
"""
from __future__ import annotations

import csv
import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import NormSeries
from .dynamics import DebyeParams, SystemState
from .spectral import make_grid

MAGIC = b"SDBF"
VERSION = 1


class SnapshotFormatError(ValueError):
    pass


def _header(state: SystemState, params: DebyeParams) -> bytes:
    g = state.grid
    head = MAGIC + struct.pack("<II", VERSION, g.d)
    head += struct.pack(f"<{g.d}I", *([g.n] * g.d))
    head += struct.pack(f"<{g.d}d", *([g.L] * g.d))
    head += struct.pack("<ddb", state.t, params.mu, params.lam)
    return head + b"\0" * (-len(head) % 8)


def write_snapshot(state: SystemState, params: DebyeParams, path) -> Path:
    path = Path(path)
    u = np.ascontiguousarray(state.u.values, dtype="<c16")
    v = np.ascontiguousarray(state.v.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_header(state, params))
        fh.write(u.tobytes())
        fh.write(v.tobytes())
    return path


def read_snapshot(path) -> tuple[SystemState, DebyeParams]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 12:
        raise SnapshotFormatError(f"{path}: truncated header")
    version, d = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}")
    if d not in (1, 2, 3, 4):
        raise SnapshotFormatError(f"{path}: bad dimension {d}")
    off = 12
    need = off + 4 * d + 8 * d + 17
    if len(data) < need:
        raise SnapshotFormatError(f"{path}: truncated header")
    ns = struct.unpack_from(f"<{d}I", data, off)
    off += 4 * d
    Ls = struct.unpack_from(f"<{d}d", data, off)
    off += 8 * d
    t, mu, lam = struct.unpack_from("<ddb", data, off)
    off += 17
    off += -off % 8
    if len(set(ns)) != 1 or len(set(Ls)) != 1:
        raise SnapshotFormatError(f"{path}: anisotropic grids are not supported")
    try:
        grid = make_grid(d, ns[0], Ls[0], max_points=max(ns[0] ** d, 1))
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: {exc}") from None
    size = grid.size
    expected = off + 16 * size + 8 * size
    if len(data) != expected:
        kind = "truncated" if len(data) < expected else "oversized"
        raise SnapshotFormatError(f"{path}: {kind} payload ({len(data)} bytes, expected {expected})")
    u = np.frombuffer(data, dtype="<c16", count=size, offset=off).reshape(grid.shape)
    v = np.frombuffer(data, dtype="<f8", count=size, offset=off + 16 * size).reshape(grid.shape)
    try:
        params = DebyeParams(mu, lam)
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: {exc}") from None
    return SystemState.from_arrays(grid, u.astype(np.complex128), v.astype(np.float64), t), params


# --- norms.csv ----------------------------------------------------------------


def _cell(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def write_csv(series: NormSeries, path) -> Path:
    path = Path(path)
    cols = series.columns()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for i, t in enumerate(series.times):
        w.writerow([_cell(t)] + [_cell(series.channels[c][i]) for c in cols[1:]])
    path.write_text(buf.getvalue())
    return path


def read_csv(path, d: int | None = None) -> NormSeries:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    p_list = [float(c[len("lp_u_"):]) for c in header if c.startswith("lp_u_")]
    series = NormSeries(d or 0, p_list)
    if header != series.columns():
        raise ValueError(f"{path}: unexpected columns {header}")
    for row in rows[1:]:
        vals = {c: (float(x) if x != "" else None) for c, x in zip(header[1:], row[1:])}
        series.append(float(row[0]), **vals)
    return series


# --- plot data ----------------------------------------------------------------


def emit_plot_data(fits, directory) -> list[Path]:
    """Two-column ``log t, log norm`` data plus a fit-line companion per fit."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for fit in fits:
        stem = f"decay_p{fit.p:g}"
        data = np.column_stack([fit.log_t, fit.log_norm])
        line = np.column_stack([fit.log_t, fit.intercept + fit.exponent * fit.log_t])
        for suffix, arr in (("", data), ("_fit", line)):
            path = directory / f"{stem}{suffix}.dat"
            np.savetxt(path, arr, fmt="%.17g", header="log_t log_norm")
            out.append(path)
    return out


# --- manifest -----------------------------------------------------------------


@dataclass
class RunManifest:
    config_digest: str
    code_version: str
    fft_backend: str
    start_time: str
    end_time: str = ""
    grid: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    status: str = "running"
    exit_code: int | None = None
    complete: bool = False
    wrap_guard_time: float | None = None
    diverged_step: int | None = None
    message: str = ""

    def write(self, path) -> Path:
        path = Path(path)
        data = asdict(self)
        if data["wrap_guard_time"] is not None and not math.isfinite(data["wrap_guard_time"]):
            data["wrap_guard_time"] = str(data["wrap_guard_time"])
        path.write_text(json.dumps(data, indent=2) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        if isinstance(data.get("wrap_guard_time"), str):
            data["wrap_guard_time"] = float(data["wrap_guard_time"])
        return cls(**data)
