"""Command-line entry point: ``sdsim run|fit|sweep|check``.

Exit codes: 0 ok, 2 config invalid, 3 diverged, 4 I/O failure,
5 wrap guard tripped before the requested measurement window.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, fft
from .checks import run_checks
from .config import ConfigError, ScenarioConfig, config_from_dict, config_to_json, load_config
from .experiments import (
    WindowError,
    WrapGuardError,
    fit_decay,
    decay_fits,
    mu_limit_sweep,
    scaling_invariance_check,
    scan_table,
    smallness_scan,
)
from .io import RunManifest, SnapshotFormatError, emit_plot_data, read_csv, read_snapshot, write_csv, write_snapshot

log = logging.getLogger("sdsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4
EXIT_WRAP_GUARD = 5


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _tag(t: float) -> str:
    return f"{t:.6f}".rstrip("0").rstrip(".").replace(".", "p")


def _resume_state(cfg: ScenarioConfig, path):
    state, params = read_snapshot(path)
    if (params.mu, params.lam) != (cfg.params.mu, cfg.params.lam):
        raise ConfigError(f"resume: snapshot has mu={params.mu}, lambda={params.lam}; config disagrees")
    g = cfg.make_grid()
    if state.grid != g:
        raise ConfigError(f"resume: snapshot grid {state.grid} differs from config grid {g}")
    if state.t > cfg.step.t_end:
        raise ConfigError(f"resume: snapshot time {state.t} is past t_end={cfg.step.t_end}")
    return state


def run_scenario(cfg: ScenarioConfig, output_dir, resume=None, workers=None) -> RunManifest:
    """Run ``cfg`` and write every artifact under ``output_dir``.

    The returned manifest carries the exit code. Partial outputs are kept
    (and listed) when the run fails.
    """
    from .runner import simulate

    out = Path(output_dir)
    manifest = RunManifest(cfg.digest(), __version__, fft.describe(), _now(),
                           grid={"d": cfg.grid.d, "n": cfg.grid.n, "L": cfg.grid.L})
    written: list[Path] = []

    def finish(code: int, status: str, message: str = "") -> RunManifest:
        manifest.exit_code = code
        manifest.status = status
        manifest.complete = code == EXIT_OK
        manifest.message = message
        manifest.end_time = _now()
        manifest.outputs = sorted({p.relative_to(out).as_posix() for p in written} | {"manifest.json"})
        try:
            manifest.write(out / "manifest.json")
        except OSError as exc:
            log.error("cannot write manifest: %s", exc)
            manifest.exit_code = EXIT_IO
        return manifest

    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(config_to_json(cfg) + "\n")
        written.append(out / "config.json")
    except OSError as exc:
        manifest.exit_code, manifest.status, manifest.message = EXIT_IO, "io-error", str(exc)
        return manifest

    state, step_offset = None, 0
    if resume is not None:
        try:
            state = _resume_state(cfg, resume)
        except (OSError, SnapshotFormatError) as exc:
            return finish(EXIT_IO, "io-error", str(exc))
        except ConfigError as exc:
            return finish(EXIT_CONFIG, "config-error", str(exc))
        step_offset = int(round(state.t / cfg.step.dt))
        if cfg.diagnostics.phase:
            # the phase integral needs the whole history from t = 1
            cfg = cfg.replace(diagnostics={"phase": False})
            log.warning("phase tracking disabled for a resumed run")

    snap_dir = out / "snapshots"
    debye = cfg.debye()

    def on_snapshot(s):
        snap_dir.mkdir(exist_ok=True)
        written.append(write_snapshot(s, debye, snap_dir / f"state_t{_tag(s.t)}.sdbf"))

    try:
        traj = simulate(cfg, state=state, on_snapshot=on_snapshot, step_offset=step_offset, workers=workers)
        written.append(write_csv(traj.series, out / "norms.csv"))
        if traj.profiles or traj.modified:
            (out / "profiles").mkdir(exist_ok=True)
        for t, snap in traj.profiles.items():
            path = out / "profiles" / f"profile_t{_tag(t)}.npy"
            np.save(path, snap.f_hat.values)
            written.append(path)
        for t, field in traj.modified.items():
            path = out / "profiles" / f"modified_t{_tag(t)}.npy"
            np.save(path, field.values)
            written.append(path)
        if traj.final is not None:
            written.append(write_snapshot(traj.final, debye, out / "final.sdbf"))
    except OSError as exc:
        return finish(EXIT_IO, "io-error", str(exc))

    guard = traj.guard_time()
    manifest.wrap_guard_time = guard
    if traj.diverged is not None:
        manifest.diverged_step = traj.diverged.step
        return finish(EXIT_DIVERGED, "diverged", str(traj.diverged))

    if cfg.decay.p:
        if guard < cfg.decay.t_start:
            return finish(EXIT_WRAP_GUARD, "wrap-guard",
                          f"wrap guard {guard:g} precedes the window start {cfg.decay.t_start:g}")
        try:
            fits = decay_fits(traj.series, cfg)
        except (WindowError, WrapGuardError) as exc:
            return finish(EXIT_WRAP_GUARD, "wrap-guard", str(exc))
        try:
            (out / "fits.json").write_text(json.dumps([f.report() for f in fits], indent=2) + "\n")
            written.append(out / "fits.json")
            written.extend(emit_plot_data(fits, out / "plot"))
        except OSError as exc:
            return finish(EXIT_IO, "io-error", str(exc))
    return finish(EXIT_OK, "ok")


# --- subcommands --------------------------------------------------------------


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    m = run_scenario(cfg, args.out, resume=args.resume, workers=args.threads)
    print(f"{m.status}: exit {m.exit_code}, wrap guard t={m.wrap_guard_time}" + (f" ({m.message})" if m.message else ""))
    return m.exit_code


def _cmd_fit(args) -> int:
    cfg = load_config(args.config) if args.config else None
    d = cfg.grid.d if cfg else args.d
    series = read_csv(args.csv, d)
    if cfg is not None and not args.p:
        fits = decay_fits(series, cfg)
    else:
        ps = [float(p) for p in (args.p or ["inf"])]
        tol = cfg.diagnostics.wrap_guard_tol if cfg else 1e-6
        fits = [fit_decay(series, p, (args.t_start, args.t_stop), 8, tol, d) for p in ps]
    reports = [f.report() for f in fits]
    print(json.dumps(reports, indent=2))
    if args.out:
        emit_plot_data(fits, args.out)
    return EXIT_OK


def _write_table(rows: list[dict], out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "table.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    (out / "table.json").write_text(json.dumps(rows, indent=2) + "\n")


def _cmd_sweep(args) -> int:
    """Sweep spec: ``{"kind": "mu_limit" | "smallness" | "scaling", "values": [...], "base": {config}}``."""
    try:
        spec = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    unknown = set(spec) - {"kind", "values", "base"}
    if unknown:
        raise ConfigError(f"sweep: unknown keys {sorted(unknown)}")
    kind, values = spec.get("kind"), spec.get("values")
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values must be a non-empty list")
    base = config_from_dict(spec.get("base", {}))
    threads = args.threads or 1
    if kind == "mu_limit":
        div = mu_limit_sweep(base, values, threads)
        rows = [{"mu": m, "divergence": x} for m, x in zip(values, div)]
    elif kind == "smallness":
        rows = scan_table(smallness_scan(base, values, threads))
    elif kind == "scaling":
        rows = [{"c": c, "discrepancy": scaling_invariance_check(base, float(c))} for c in values]
    else:
        raise ConfigError("sweep.kind must be one of mu_limit, smallness, scaling")
    for row in rows:
        print(json.dumps(row))
    if args.out:
        _write_table(rows, Path(args.out))
    return EXIT_OK


def _cmd_check(args) -> int:
    results = run_checks(args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdsim", description="Schrödinger–Debye pseudo-spectral simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--resume", help="SDBF snapshot to continue from")
    run.add_argument("--threads", type=int, default=None, help="FFT threads")
    run.set_defaults(func=_cmd_run)

    fit = sub.add_parser("fit", help="fit decay exponents from a norms.csv")
    fit.add_argument("csv")
    fit.add_argument("--config", help="scenario config supplying d and the decay window")
    fit.add_argument("--d", type=int, default=1)
    fit.add_argument("--p", action="append", help="exponent p (repeatable; 'inf' allowed)")
    fit.add_argument("--t-start", type=float, default=2.0)
    fit.add_argument("--t-stop", type=float, default=None)
    fit.add_argument("--out", help="directory for plot data")
    fit.set_defaults(func=_cmd_fit)

    sweep = sub.add_parser("sweep", help="run a parameter sweep spec")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out")
    sweep.add_argument("--threads", type=int, default=1, help="parallel scenarios")
    sweep.set_defaults(func=_cmd_sweep)

    check = sub.add_parser("check", help="built-in analytic-oracle self-tests")
    check.add_argument("--seed", type=int, default=0, help="seed for the random-field checks")
    check.set_defaults(func=_cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", None) and args.command == "run":
        fft.set_threads(args.threads)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WindowError, WrapGuardError) as exc:
        print(f"measurement impossible: {exc}", file=sys.stderr)
        return EXIT_WRAP_GUARD
    except (OSError, SnapshotFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())
