"""Leakage out of the (0, 0) winding block under a uniform X field, against the bound.

    python scripts/protection.py [--sizes 2 3] [--strengths 0.1 0.25 0.5 1.2]
"""

import argparse

from toricsim.evolve import perturbed_protection_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--strengths", type=float, nargs="+", default=[0.1, 0.25, 0.5])
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--space", default="symmetric", choices=["symmetric", "full"])
    args = ap.parse_args()

    for L in args.sizes:
        for r in perturbed_protection_experiment(L, args.strengths, T=args.T, space=args.space):
            bound = "not claimed" if r.bound is None else f"{r.bound:.3e}"
            print(f"L={L}  V={r.V:<5}  leakage={r.measured:.3e}  bound={bound}  delta={r.delta:.3f}")


if __name__ == "__main__":
    main()
