"""Full default benchmark in one go: both comparator modes, NNBS and INBS
sweeps, and the baseline table, sharing one trained pipeline.

    python scripts/run_benchmark.py --out results/ [--repetitions 50] [--seed 0]

This writes the same CSV layout as the CLI subcommands.
"""

import argparse
import dataclasses
import logging
import time

from ordnbs import experiment as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--repetitions", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--config", default=None, help="JSON config; overrides the defaults")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = ex.ExperimentConfig.load(args.config) if args.config else ex.ExperimentConfig()
    cfg = cfg.replace(modes=(1, 2), algorithms=("nnbs", "inbs"), repetitions=args.repetitions,
                      seed=args.seed, budgets=tuple(sorted({*cfg.budgets, cfg.baseline_budget})))
    t0 = time.perf_counter()
    pipe = ex.prepare(cfg)
    report, deltas = ex.compare_algorithms(cfg, pipeline=pipe)
    H = cfg.baseline_budget
    for b in ex.fit_baselines(pipe):
        report.baselines.append(b)
    for alg, mode in ex.BASELINE_ROWS:
        agg = report.get(alg, mode, H)
        report.baselines.append({"method": f"{alg}_mode{mode}", "acc": agg.acc_mean,
                                 "mae": agg.mae_mean, "tau": agg.tau_mean})
    files = ex.report_files(report, cfg.scale)
    names = [f.name for f in dataclasses.fields(ex.AlgorithmDelta)]
    files["compare.csv"] = ex.csv_text(names, ([getattr(d, n) for n in names] for d in deltas))
    for mode, tlog in pipe.logs.items():
        files[f"training_log_mode{mode}.csv"] = tlog.to_csv()
    ex.write_files(args.out, files)
    print(f"wrote {len(files)} files to {args.out} in {time.perf_counter() - t0:.0f} s")
    for b in report.baselines:
        print(f"{b['method']:<12s} acc {b['acc']:.4f}  mae {b['mae']:.4f}  tau {b['tau']:.4f}")


if __name__ == "__main__":
    main()
