"""Compare ||alpha||^{-1} with the closed-form half-space constant sqrt(N) / (2^m sqrt(Gamma(m+1))).

For k = 1, lambda = 0 the two agree only up to sqrt(N * omega_{N,1}); this prints both,
plus |beta0| of the default generic datum from the discrete spectral projection.
"""
import argparse
import math

from hardycorner.eigen import lowest_eigenvalues
from hardycorner.evolve import make_initial, spectral_expand
from hardycorner.model import CornerParams, alpha_l2_norm_sq, omega_nk
from hardycorner.radial import RadialGrid, assemble


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--n", type=int, default=20000)
    args = ap.parse_args()

    print(f"{'N':>2} {'m':>6} {'1/||alpha||':>14} {'half-space':>14} {'ratio':>10} {'sqrt(N w)':>10} {'beta0 spec':>12}")
    for N in args.dims:
        p = CornerParams(N, 1, 0.0)
        inv_norm = 1 / math.sqrt(alpha_l2_norm_sq(p))
        half = math.sqrt(N) / (2 ** p.m * math.sqrt(math.gamma(p.m + 1)))
        op = assemble(p, RadialGrid.default(n=args.n))
        v0 = make_initial("generic", op)
        spec = lowest_eigenvalues(op, 1)
        beta0 = spectral_expand(v0, spec, op)[0]
        print(f"{N:>2} {p.m:6.3f} {inv_norm:14.8g} {half:14.8g} {half / inv_norm:10.6f} "
              f"{math.sqrt(N * omega_nk(N, 1)):10.6f} {abs(beta0):12.8g}")


if __name__ == "__main__":
    main()
