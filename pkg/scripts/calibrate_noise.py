#!/usr/bin/env python3
"""Pick feature_noise_sd so the trained comparator's per-boundary AUC sits in a band.

For each candidate noise level, trains both comparator modes under several
master seeds and prints min / mean / max validation AUC per boundary.

    python scripts/calibrate_noise.py --noise 2.0 2.5 3.0 --seeds 0 1 2
"""

import argparse
import dataclasses

import numpy as np

from ordnbs.experiment import ExperimentConfig, build_data, train_comparator


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--noise", type=float, nargs="+", default=[2.0, 2.5, 3.0, 3.5])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--modes", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--size", type=int, default=None, help="population size override")
    ap.add_argument("--fractions", type=float, nargs=3, default=None, help="train/validation/test split")
    ap.add_argument("--val-budget", type=int, default=None, help="validation pairs per boundary")
    ap.add_argument("--band", type=float, nargs=2, default=[0.70, 0.85])
    args = ap.parse_args()

    lo, hi = args.band
    print("noise,mode,boundary,auc_min,auc_mean,auc_max,in_band")
    for noise in args.noise:
        base = ExperimentConfig()
        pop = dataclasses.replace(base.population, feature_noise_sd=noise)
        if args.size:
            pop = dataclasses.replace(pop, size=args.size)
        base = base.replace(population=pop)
        if args.fractions:
            base = base.replace(split_fractions=tuple(args.fractions))
        if args.val_budget:
            base = base.replace(comparator=dataclasses.replace(base.comparator, validation_budget=args.val_budget))
        aucs = {}
        for seed in args.seeds:
            cfg = base.replace(seed=seed)
            split = build_data(cfg)
            for mode in args.modes:
                _, _, reports = train_comparator(cfg, split, mode)
                for r in reports:
                    aucs.setdefault((mode, r.boundary_index), []).append(r.auc)
        for (mode, i), vals in sorted(aucs.items()):
            v = np.array(vals)
            ok = lo <= v.min() and v.max() <= hi
            print(f"{noise},{mode},{i},{v.min():.4f},{v.mean():.4f},{v.max():.4f},{int(ok)}")


if __name__ == "__main__":
    main()
