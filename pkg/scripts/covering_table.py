"""Empirical covering constants and sum-bound margins per surface and length."""
import argparse
import csv
import sys
from fractions import Fraction

from flatkhinchin import cylinder_sequence, load_surface, minimal_covering_constant
from flatkhinchin.circle import sum_bound_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--surfaces", nargs="+", default=["builtin:square_torus", "builtin:L(2,2)"])
    ap.add_argument("--lengths", type=float, nargs="+", default=[5, 10, 20, 40])
    ap.add_argument("--kmax", type=int, default=6)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["surface", "L", "cylinders", "c_emp", "worst_sum_bound_ratio"])
    for ref in args.surfaces:
        s = load_surface(ref)
        for L in args.lengths:
            cyls = cylinder_sequence(s, L)
            c = minimal_covering_constant(s, L, cylinders=cyls)
            worst = 0.0
            for k in range(args.kmax + 1):
                for i in range(2 ** k):
                    r = sum_bound_check(s, L, (Fraction(i, 2 ** k), Fraction(i + 1, 2 ** k)), cylinders=cyls)
                    worst = max(worst, r["measured"] / r["bound"])
            w.writerow([ref, L, len(cyls), c, worst])


if __name__ == "__main__":
    main()
