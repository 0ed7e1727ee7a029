"""Scan the initial amplitude of a d=2 run and bracket where it stops reaching the horizon."""
import argparse
import json

from sdsim.config import load_config
from sdsim.experiments import scan_table, smallness_scan, threshold_bracket


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/focusing_d2_large.json")
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    rows = smallness_scan(load_config(args.config), args.amplitudes, args.threads)
    for row in scan_table(rows):
        print(json.dumps(row))
    lo, hi = threshold_bracket(rows)
    print(f"threshold bracket: ({lo}, {hi})")


if __name__ == "__main__":
    main()
