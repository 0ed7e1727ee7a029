"""Small-data decay run in dimension d with fits, profile residuals and (d=1) the phase diagnostics.

    python3 scripts/decay_experiment.py --d 2 --out runs/d2
"""
import argparse
import json
import math

from sdsim.cli import run_scenario
from sdsim.diagnostics import scattering_residual
from sdsim.experiments import box_doubled, decay_fits, fit_decay, small_data_scenario
from sdsim.runner import simulate
from sdsim.spectral import ComplexField, lp_norm


def increments(fields, times):
    return [lp_norm(ComplexField(fields[a].grid, fields[b].values - fields[a].values, "spectral"), 2)
            for a, b in zip(times, times[1:])]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=1, choices=(1, 2, 3, 4))
    ap.add_argument("--out", help="write the full run directory here (otherwise run in memory)")
    ap.add_argument("--double", action="store_true", help="repeat the fit on a box twice as long")
    ap.add_argument("--t-end", type=float, help="override the horizon (quick looks)")
    args = ap.parse_args()

    cfg = small_data_scenario(args.d)
    if args.t_end:
        cfg = cfg.replace(step={"t_end": args.t_end},
                          diagnostics={"profile_times": tuple(t for t in cfg.diagnostics.profile_times if t <= args.t_end)})
    if args.out:
        m = run_scenario(cfg, args.out)
        print(f"run finished with exit {m.exit_code}, outputs in {args.out}")
    traj = simulate(cfg)
    if traj.diverged is not None:
        raise SystemExit(f"diverged: {traj.diverged}")
    guard = traj.guard_time()
    print(f"wrap guard t = {guard:g}")
    for fit in decay_fits(traj.series, cfg):
        print(json.dumps(fit.report()))

    times = sorted(t for t in traj.profiles if t <= guard)
    res = [scattering_residual(traj.profiles[a], traj.profiles[b]) for a, b in zip(times, times[1:])]
    for (a, b), r in zip(zip(times, times[1:]), res):
        print(f"profile residual ({a:g}, {b:g}): {r:.3e}")
    v = traj.series.channel("l2_v")
    print(f"|v(T)| / |v0| = {v[-1] / v[0]:.3e}")

    if traj.phase is not None and len(traj.modified) >= 2:
        mt = sorted(traj.modified)
        raw = increments({t: traj.profiles[t].f_hat for t in mt}, mt)
        mod = increments(traj.modified, mt)
        for (a, b), x, y in zip(zip(mt, mt[1:]), raw, mod):
            print(f"profile increment ({a:g}, {b:g}): plain {x:.3e}, phase-corrected {y:.3e}")
        print(f"phase log-coefficient ratio: {traj.phase_log_ratio():.4f}")

    if args.double:
        big = simulate(box_doubled(cfg))
        stop = guard if math.isfinite(guard) else None
        for p in cfg.decay.p:
            fit = fit_decay(big.series, p, (cfg.decay.t_start, stop), d=cfg.grid.d)
            print(f"doubled box, p={p:g}: exponent {fit.exponent:.4f} on the original window")


if __name__ == "__main__":
    main()
