"""Adiabatic error delta against the total sweep time T at L = 2 (or 3).

    python scripts/adiabatic_sweep.py [--L 2] [--schedule trig-smooth]
"""

import argparse

from toricsim.evolve import SweepConfig, propagate
from toricsim.lattice import build_torus
from toricsim.model import ModelParams, Schedule
from toricsim.spectral import gap_scan


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--L", type=int, default=2)
    ap.add_argument("--schedule", default="trig-smooth")
    ap.add_argument("--c", type=float, nargs="+", default=[5, 10, 20, 40, 80])
    args = ap.parse_args()

    params, sched = ModelParams(), Schedule(args.schedule)
    gap = gap_scan(build_torus(args.L), params, sched).gap_min
    print(f"L={args.L}  Delta_min={gap:.6f}")
    for c in args.c:
        r = propagate(SweepConfig(L=args.L, params=params, schedule=sched, T=c / gap, tol=1e-11))
        print(f"c={c:6.1f}  T={c / gap:9.3f}  delta={r.delta:.3e}  steps={r.steps}  matvecs={r.matvecs}")


if __name__ == "__main__":
    main()
