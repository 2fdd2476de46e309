"""Time the neutral (0, 0) block ground state at one point of the sweep.

    python scripts/bench_ground_state.py 4
    python scripts/bench_ground_state.py 5 --ncv 12    # block dim 2**24, several GB

L = 5 uses the plaquette-coordinate basis, so memory is dominated by the
Lanczos vectors (ncv of them, 128 MiB each).
"""

import argparse
import json
import time

from toricsim.lattice import build_torus
from toricsim.model import ModelParams, Schedule
from toricsim.spectral import low_spectrum, sector_operator


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("L", type=int)
    ap.add_argument("--tau", type=float, default=0.7)
    ap.add_argument("--ncv", type=int, default=None)
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args()

    t0 = time.perf_counter()
    lat = build_torus(args.L)
    basis, sweep = sector_operator(lat, ModelParams(), Schedule(), (0, 0))
    op = sweep.at(args.tau)
    t1 = time.perf_counter()
    res = low_spectrum(op, 1, tol=args.tol, ncv=args.ncv)
    t2 = time.perf_counter()
    print(json.dumps({
        "L": args.L, "dim": basis.dim, "tau": args.tau,
        "E0": float(res.eigenvalues[0]), "residual": float(res.residuals[0]),
        "setup_s": t1 - t0, "solve_s": t2 - t1, "total_s": t2 - t0,
    }, indent=2))


if __name__ == "__main__":
    main()
