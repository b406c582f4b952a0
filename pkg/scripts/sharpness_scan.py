"""Rayleigh quotient of the cut-off ground state Lambda_eps as eps -> 0.

The gap Q(Lambda_eps) - (1+m)/2 should vanish like 1/|log eps| in the critical case.
"""
import argparse

from hardycorner.hardy import sharpness_scan
from hardycorner.model import CornerParams, hardy_constant


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=4)
    ap.add_argument("--corner", type=int, default=2)
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-1, 1e-2, 1e-3, 1e-4])
    args = ap.parse_args()

    p = CornerParams(args.dim, args.corner, hardy_constant(args.dim, args.corner))
    scan = sharpness_scan(p, args.eps)
    print(f"{'eps':>8} {'quotient':>14} {'gap':>12} {'gap*|log eps|':>14} {'||Lambda_eps||':>14}")
    for row in scan.rows:
        print(f"{row.epsilon:8.1e} {row.quotient:14.10f} {row.gap:12.4e} "
              f"{row.gap_times_log_eps:14.6f} {row.norm_Lambda_eps:14.6g}")
    print("monotone:", scan.monotone)


if __name__ == "__main__":
    main()
