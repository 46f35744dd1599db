"""Command-line entry point: ``ordnbs <subcommand> [options]``.

Every subcommand takes the same flags.  ``--config`` points at a JSON file
whose keys mirror ExperimentConfig; ``--seed``, ``--algorithm`` and ``--mode``
override the corresponding config fields.  The config is validated before
anything is computed, and outputs land in ``--out`` all at once or not at all.
"""

from __future__ import annotations

import logging
import sys

import click

from . import comparator as cmp, datagen, experiment as ex

U64 = click.IntRange(0, 2**64 - 1)


def _load(config_path, seed, algorithm, mode) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.load(config_path) if config_path else ex.ExperimentConfig()
    kw = {}
    if seed is not None:
        kw["seed"] = seed
    if algorithm is not None:
        kw["algorithms"] = (algorithm,)
    if mode is not None:
        kw["modes"] = (mode,)
    # replace() re-runs validation
    return cfg.replace(**kw) if kw else cfg


def common(fn):
    for opt in reversed([
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="JSON config file (keys of ExperimentConfig)."),
        click.option("--seed", type=U64, default=None, help="Master seed (overrides config)."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out",
                     show_default=True, help="Output directory."),
        click.option("--algorithm", type=click.Choice(["nnbs", "inbs"]), default=None),
        click.option("--mode", type=click.IntRange(1, 2), default=None),
    ]):
        fn = opt(fn)
    return fn


def _run(fn):
    """Turn library errors into a one-line message and exit status 1."""
    try:
        return fn()
    except (ex.ConfigError, ex.ExperimentError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Ordinal category estimation as noisy binary search."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@common
def generate(config_path, seed, out_dir, algorithm, mode):
    """Write the synthetic population with split tags to population.csv."""
    def go():
        cfg = _load(config_path, seed, algorithm, mode)
        split = ex.build_data(cfg)
        items = sorted((*split.training_I, *split.validation, *split.test), key=lambda it: it.id)
        ex.write_files(out_dir, {"population.csv": datagen.population_csv(items, split.tags())})
        click.echo(f"{len(items)} items -> {out_dir}/population.csv")
    _run(go)


def _single_mode(cfg, mode):
    return mode if mode is not None else cfg.modes[0]


@main.command()
@common
def train(config_path, seed, out_dir, algorithm, mode):
    """Train the comparator; write model, training log and per-boundary table."""
    def go():
        cfg = _load(config_path, seed, algorithm, mode)
        m = _single_mode(cfg, mode)
        split = ex.build_data(cfg)
        model, log, reports = ex.train_comparator(cfg, split, m)
        report = ex.ExperimentReport(comparator={m: reports})
        files = ex.report_files(report, cfg.scale)
        files[f"model_mode{m}.txt"] = cmp.dumps_model(model)
        files[f"training_log_mode{m}.csv"] = log.to_csv()
        ex.write_files(out_dir, files)
        _echo_boundaries(reports)
    _run(go)


@main.command()
@common
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Saved comparator; trained from the config when omitted.")
def evaluate(config_path, seed, out_dir, algorithm, mode, model_path):
    """Per-boundary comparator accuracy and AUC on the validation pairs."""
    def go():
        cfg = _load(config_path, seed, algorithm, mode)
        split = ex.build_data(cfg)
        if model_path:
            model = cmp.load_model(model_path)
            if mode is not None and mode != model.mode:
                raise ex.ConfigError(f"--mode {mode} does not match the saved model (mode {model.mode})")
            m = model.mode
            val = datagen.build_validation_pairs(
                split, cfg.comparator.validation_budget, m,
                seed=ex.derive_int(cfg.seed, "pairs/val", m))
            reports = cmp.evaluate_comparator(model, val)
        else:
            m = _single_mode(cfg, mode)
            _, _, reports = ex.train_comparator(cfg, split, m)
        ex.write_files(out_dir, ex.report_files(ex.ExperimentReport(comparator={m: reports}), cfg.scale))
        _echo_boundaries(reports)
    _run(go)


@main.command()
@common
def sweep(config_path, seed, out_dir, algorithm, mode):
    """Accuracy, MAE and tau against the comparison budget H."""
    def go():
        cfg = _load(config_path, seed, algorithm, mode)
        report = ex.run_sweep(cfg, out_dir)
        _echo_aggregates(report)
    _run(go)


@main.command()
@common
def compare(config_path, seed, out_dir, algorithm, mode):
    """NNBS against INBS on one comparator and seed schedule (--algorithm is ignored)."""
    def go():
        cfg = _load(config_path, seed, None, mode)
        report, deltas = ex.compare_algorithms(cfg, out_dir)
        _echo_aggregates(report)
        for d in deltas:
            click.echo(f"mode {d.mode} H={d.H:<4d} acc(inbs-nnbs) {d.acc_delta:+.4f}")
    _run(go)


@main.command()
@common
def baselines(config_path, seed, out_dir, algorithm, mode):
    """Direct classifier and regressor next to the NBS rows at the baseline budget."""
    def go():
        cfg = _load(config_path, seed, None, None)
        report = ex.run_baseline_comparison(cfg, out_dir)
        for b in report.baselines:
            click.echo(f"{b['method']:<12s} acc {b['acc']:.4f}  mae {b['mae']:.4f}  tau {b['tau']:.4f}")
    _run(go)


def _echo_boundaries(reports):
    for r in reports:
        a = "n/a" if r.auc is None else f"{r.auc:.4f}"
        click.echo(f"boundary {r.boundary_index}: n={r.n_pairs} acc {r.accuracy:.4f} auc {a}")


def _echo_aggregates(report):
    for a in report.aggregates:
        click.echo(f"{a.algorithm} mode {a.mode} H={a.H:<4d} acc {a.acc_mean:.4f} +- {a.acc_std:.4f}"
                   f"  mae {a.mae_mean:.4f}  tau {a.tau_mean:.4f}")


if __name__ == "__main__":
    main()
