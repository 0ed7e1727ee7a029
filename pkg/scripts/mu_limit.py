"""Distance between the Schrödinger-Debye and cubic NLS solutions at t=1 as mu shrinks."""
import argparse

from sdsim.experiments import log_slope, mu_limit_sweep, smooth_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mu", type=float, nargs="+", default=[1, 0.5, 0.25, 0.125, 0.0625])
    ap.add_argument("--amplitude", type=float, default=0.5)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    base = smooth_scenario(initial={"u_amplitude": args.amplitude, "v_amplitude": args.amplitude}, step={"dt": 0.01})
    div = mu_limit_sweep(base, args.mu, args.threads)
    for mu, x in zip(args.mu, div):
        print(f"mu={mu:<8g} |u_SD - u_NLS| = {x:.4e}")
    print(f"log-log slope: {log_slope(args.mu, div):.3f}")


if __name__ == "__main__":
    main()
