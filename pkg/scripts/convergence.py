"""Grid refinement of the ground state and the radial ladder.

Prints |mu_j - (j + (1+m)/2)| for j < count on successively doubled grids, with the
observed order log2(err(n) / err(2n)).
"""
import argparse
import math

from hardycorner.eigen import radial_ladder_check
from hardycorner.model import CornerParams, hardy_constant
from hardycorner.radial import RadialGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--corner", type=int, default=1)
    ap.add_argument("--lam", type=float, default=None, help="default: critical value")
    ap.add_argument("--count", type=int, default=4)
    ap.add_argument("--scheme", default="regular", choices=["regular", "dirichlet"])
    ap.add_argument("--sizes", type=int, nargs="+", default=[2500, 5000, 10000, 20000, 40000])
    args = ap.parse_args()

    lam = hardy_constant(args.dim, args.corner) if args.lam is None else args.lam
    p = CornerParams(args.dim, args.corner, lam)
    print(f"N={p.dim} k={p.corner} lambda={p.lam:g} m={p.m:.6g} scheme={args.scheme}")
    prev = None
    for n in args.sizes:
        rep = radial_ladder_check(p, RadialGrid.default(n=n), args.count, args.scheme)
        dev = rep.deviations
        line = f"n={n:>6} " + " ".join(f"{d:10.3e}" for d in dev)
        if prev is not None:
            line += "   order " + " ".join(
                f"{math.log2(a / b):5.2f}" if b > 0 else "  inf" for a, b in zip(prev, dev))
        print(line)
        prev = dev


if __name__ == "__main__":
    main()
