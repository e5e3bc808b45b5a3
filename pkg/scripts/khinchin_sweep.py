"""Hit fractions of the flow experiment over a ladder of horizons.

    python scripts/khinchin_sweep.py --surface builtin:L(2,2) --horizons 100 1000 10000
"""
import argparse
import csv
import sys

from flatkhinchin.experiments import ExperimentConfig, run_khinchin_flow


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--surface", default="builtin:square_torus")
    ap.add_argument("--target", default="harmonic:1")
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--horizons", type=float, nargs="+", default=[100.0, 1000.0, 10000.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["horizon", "hit_fraction", "any_hit_fraction", "median_first_hit_time", "failed"])
    for h in args.horizons:
        cfg = ExperimentConfig(surface=args.surface, target=args.target, samples=args.samples, horizon=h, seed=args.seed)
        agg = run_khinchin_flow(cfg, workers=args.threads).aggregate
        w.writerow([h, agg["hit_fraction"], agg["any_hit_fraction"], agg["median_first_hit_time"], agg["failed"]])


if __name__ == "__main__":
    main()
