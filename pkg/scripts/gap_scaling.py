"""Gap minimum along the sweep for L = 2, 3, 4 and the log-log slope of Delta_min(L).

    python scripts/gap_scaling.py [--schedule linear] [--grid 41]
"""

import argparse

import numpy as np

from toricsim.cli import loglog_slope
from toricsim.lattice import build_torus
from toricsim.model import ModelParams, Schedule
from toricsim.spectral import gap_scan


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--schedule", default="linear")
    ap.add_argument("--grid", type=int, default=41)
    args = ap.parse_args()

    scans = []
    for L in args.sizes:
        s = gap_scan(build_torus(L), ModelParams(), Schedule(args.schedule), np.linspace(0, 1, args.grid))
        scans.append(s)
        print(f"L={L}  tau_min={s.tau_min:.5f}  gap_min={s.gap_min:.6f}  lambda1/lambda2={s.coupling_ratio:.4f}"
              f"  E2-E1={s.excited_splitting:.4f}")
    slope, err = loglog_slope(args.sizes, [s.gap_min for s in scans])
    if slope is not None:
        print(f"slope d log(gap) / d log(L) = {slope:.4f}" + (f" +/- {err:.4f}" if err is not None else ""))


if __name__ == "__main__":
    main()
