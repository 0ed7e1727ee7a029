"""Pseudo-scaling check: rescaled run vs rescaled base run, for both mu orientations."""
import argparse

from sdsim.experiments import derive_scaling_orientation, scaling_invariance_check, smooth_scenario, splitting_error


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--c", type=float, nargs="+", default=[2.0, 3.0, 4.0])
    args = ap.parse_args()

    print(f"orientation that closes symbolically: {derive_scaling_orientation()}")
    base = smooth_scenario()
    print(f"splitting error of the base run: {splitting_error(base):.3e}")
    linear = smooth_scenario(step={"linear": True})
    for c in args.c:
        good = scaling_invariance_check(base, c, "mu/mu*")
        bad = scaling_invariance_check(base, c, "mu*/mu")
        lin = scaling_invariance_check(linear, c)
        print(f"c={c:g}: mu/mu* {good:.3e}, mu*/mu {bad:.3e}, linear {lin:.1e}")


if __name__ == "__main__":
    main()
