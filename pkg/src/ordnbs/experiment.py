"""Experiment harness: configs, seed schedule, budget sweeps and CSV output.

Every random stage draws from `derive_seed(master_seed, tag, *indices)`, so
a repetition's result depends only on the master seed and its own indices.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import baselines, comparator as cmp, datagen, metrics
from .core import WHO_BMI_BOUNDARIES, OrdinalScale, categories_of
from .nbs import ALGORITHMS, DEFAULT_EPSILON, NbsParams, search_budget
from .oracles import BradleyTerryOracle, ComparatorOracle, ThresholdFlipOracle

log = logging.getLogger(__name__)

ORACLES = ("comparator", "threshold", "bradley_terry")
DEFAULT_BUDGETS = (8, 20, 50, 100, 200, 500)


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.__cause__ = cause


def derive_seed(master_seed: int, tag: str, *indices: int) -> np.random.SeedSequence:
    key = (zlib.crc32(tag.encode()), *(int(i) for i in indices))
    return np.random.SeedSequence(int(master_seed), spawn_key=key)


def derive_int(master_seed: int, tag: str, *indices: int) -> int:
    return int(derive_seed(master_seed, tag, *indices).generate_state(1, np.uint64)[0])


@dataclass
class ComparatorConfig:
    k: int = 4
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    train_budget: int = 5000
    validation_budget: int = 4000


@dataclass
class ExperimentConfig:
    population: datagen.PopulationSpec = field(default_factory=datagen.PopulationSpec)
    boundaries: tuple[float, ...] = WHO_BMI_BOUNDARIES
    gamma: float = 0.3
    split_fractions: tuple[float, float, float] = (0.55, 0.25, 0.2)
    comparator: ComparatorConfig = field(default_factory=ComparatorConfig)
    modes: tuple[int, ...] = (2,)
    algorithms: tuple[str, ...] = ("nnbs",)
    budgets: tuple[int, ...] = DEFAULT_BUDGETS
    repetitions: int = 50
    epsilon: float = DEFAULT_EPSILON
    k1: int | None = None
    k2: int | None = None
    oracle: str = "comparator"
    flip_prob: float = 0.0
    baseline_budget: int = 500
    test_items: int | None = None
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.population, dict):
            self.population = datagen.PopulationSpec(**self.population)
        if isinstance(self.comparator, dict):
            self.comparator = ComparatorConfig(**self.comparator)
        for name in ("boundaries", "split_fractions", "modes", "algorithms", "budgets"):
            setattr(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        try:
            self.scale
            self.population.validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.population.low != self.scale.low or self.population.high != self.scale.high:
            raise ConfigError("population latent range must match the outer boundaries")
        if not self.gamma >= 0:
            raise ConfigError("gamma must be non-negative")
        fr = np.asarray(self.split_fractions, dtype=float)
        if fr.size != 3 or np.any(fr <= 0) or not np.isclose(fr.sum(), 1.0):
            raise ConfigError("split_fractions must be three positives summing to 1")
        if not self.modes or any(m not in cmp.MODES for m in self.modes):
            raise ConfigError(f"modes must be drawn from {cmp.MODES}")
        if not self.algorithms or any(a not in ALGORITHMS for a in self.algorithms):
            raise ConfigError(f"algorithms must be drawn from {sorted(ALGORITHMS)}")
        if not self.budgets or any(int(h) < 1 for h in self.budgets):
            raise ConfigError("budgets must be positive integers")
        # every interior boundary needs at least one comparison
        if self.baseline_budget < 1 or min(*self.budgets, self.baseline_budget) < self.scale.n - 2:
            raise ConfigError(f"budgets must be >= {self.scale.n - 2} (number of interior boundaries)")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not 0 < self.epsilon < 0.5:
            raise ConfigError("epsilon must lie in (0, 0.5)")
        if self.oracle not in ORACLES:
            raise ConfigError(f"oracle must be one of {ORACLES}")
        if not 0 <= self.flip_prob < 0.5:
            raise ConfigError("flip_prob must lie in [0, 0.5)")
        if self.test_items is not None and self.test_items < 2:
            raise ConfigError("test_items must be >= 2")
        c = self.comparator
        if c.k < 1 or c.batch_size < 1 or c.max_epochs < 0 or c.patience < 1:
            raise ConfigError("invalid comparator hyperparameters")
        if c.train_budget < 1 or c.validation_budget < 1:
            raise ConfigError("pair budgets must be positive")

    @property
    def scale(self) -> OrdinalScale:
        return OrdinalScale(self.boundaries)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


@dataclass
class Pipeline:
    """Data and trained comparators shared by every search in a run."""

    config: ExperimentConfig
    split: datagen.DatasetSplit
    models: dict = field(default_factory=dict)
    logs: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scale = self.config.scale

    @property
    def test(self):
        t = self.split.test
        n = self.config.test_items
        return t if n is None else t[:n]

    def aucs(self, mode: int) -> list[float]:
        """Per-interior-boundary AUCs; equal weights for analytic oracles."""
        if self.config.oracle != "comparator":
            return [0.5] * (self.scale.n - 2)
        out = []
        for r in self.reports[mode]:
            if r.auc is None:
                raise ValueError(f"AUC undefined for boundary {r.boundary_index}")
            out.append(r.auc)
        return out


def _stage(name):
    def wrap(fn):
        def inner(*a, **kw):
            try:
                return fn(*a, **kw)
            except ExperimentError:
                raise
            except Exception as e:
                raise ExperimentError(name, e) from e
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


@_stage("data")
def build_data(config: ExperimentConfig) -> datagen.DatasetSplit:
    spec = dataclasses.replace(config.population, seed=derive_int(config.seed, "population"))
    items = datagen.generate_population(spec)
    return datagen.split_and_anchor(items, config.scale, config.gamma, config.split_fractions,
                                    seed=derive_int(config.seed, "split"))


@_stage("train")
def train_comparator(config: ExperimentConfig, split: datagen.DatasetSplit, mode: int):
    c = config.comparator
    tr = datagen.build_training_pairs(split, c.train_budget, mode, seed=derive_int(config.seed, "pairs/train", mode))
    va = datagen.build_validation_pairs(split, c.validation_budget, mode, seed=derive_int(config.seed, "pairs/val", mode))
    model = cmp.PairwiseComparator.init(config.population.feature_dim, c.k, mode,
                                        seed=derive_int(config.seed, "init", mode))
    opt = cmp.OptimizerParams(c.learning_rate, c.momentum, c.batch_size, c.max_epochs, c.patience,
                              seed=derive_int(config.seed, "sgd", mode))
    model, tlog = cmp.train(model, tr, va, opt)
    model.threshold = cmp.select_threshold(model, va)
    return model, tlog, cmp.evaluate_comparator(model, va)


def prepare(config: ExperimentConfig, modes: Iterable[int] | None = None) -> Pipeline:
    pipe = Pipeline(config, build_data(config))
    if config.oracle == "comparator":
        for mode in modes or config.modes:
            pipe.models[mode], pipe.logs[mode], pipe.reports[mode] = train_comparator(config, pipe.split, mode)
            log.info("mode %d comparator: %s", mode,
                     ", ".join(f"AUC_{r.boundary_index}={r.auc:.3f}" for r in pipe.reports[mode]))
    return pipe


def _oracle_factory(pipe: Pipeline, mode: int):
    cfg = pipe.config
    scale = pipe.scale
    if cfg.oracle == "comparator":
        model = pipe.models[mode]
        anchors = pipe.split.anchors
        Q = np.stack([it.features for it in pipe.test])
        tables = ComparatorOracle.verdict_tables(model, anchors, Q, model.threshold)
        base = [ComparatorOracle(model, anchors, Q[j], model.threshold,
                                 _verdicts={i: t[j] for i, t in tables.items()})
                for j in range(Q.shape[0])]
        return lambda j, seed: base[j].reseeded(seed)
    if cfg.oracle == "threshold":
        return lambda j, seed: ThresholdFlipOracle(scale, pipe.test[j].latent_value, cfg.flip_prob, seed)
    return lambda j, seed: BradleyTerryOracle(scale, pipe.test[j].latent_value, seed)


@dataclass
class RepetitionRow:
    algorithm: str
    mode: int
    H: int
    repetition: int
    acc: float
    mae: float
    tau: float
    queries: int
    fallbacks: int


@_stage("search")
def run_repetitions(pipe: Pipeline, mode: int, algorithm: str, H: int,
                    repetitions: int | None = None) -> tuple[list[RepetitionRow], list[np.ndarray]]:
    """All repetitions for one (algorithm, mode, H); also returns the predictions."""
    cfg = pipe.config
    R = cfg.repetitions if repetitions is None else repetitions
    budgets = search_budget(H, pipe.aucs(mode))
    params = NbsParams(budgets, cfg.epsilon, cfg.k1, cfg.k2)
    search = ALGORITHMS[algorithm]
    make = _oracle_factory(pipe, mode)
    truth = categories_of(pipe.scale, [it.latent_value for it in pipe.test])
    rows, preds = [], []
    for r in range(R):
        pred = np.empty(truth.size, dtype=int)
        queries = fallbacks = 0
        for j in range(truth.size):
            oracle = make(j, derive_seed(cfg.seed, f"search/mode{mode}/H{H}", r, j))
            res = search(oracle, pipe.scale, params)
            pred[j] = res.category_index
            queries += res.queries_used
            fallbacks += res.fell_back
        rows.append(RepetitionRow(algorithm, mode, H, r, metrics.accuracy(pred, truth),
                                  metrics.mae(pred, truth), metrics.kendall_tau(pred, truth),
                                  queries, fallbacks))
        preds.append(pred)
    return rows, preds


METRICS = ("acc", "mae", "tau")


@dataclass
class AggregateRow:
    algorithm: str
    mode: int
    H: int
    repetitions: int
    acc_mean: float
    acc_std: float
    mae_mean: float
    mae_std: float
    tau_mean: float
    tau_std: float
    queries_mean: float
    queries_total: int


def aggregate(rows: Sequence[RepetitionRow]) -> AggregateRow:
    """Mean and population std (ddof=0) over repetitions."""
    first = rows[0]
    vals = {m: np.array([getattr(r, m) for r in rows]) for m in METRICS}
    q = np.array([r.queries for r in rows])
    stats = {}
    for m, v in vals.items():
        stats[f"{m}_mean"] = float(v.mean())
        stats[f"{m}_std"] = float(v.std())
    return AggregateRow(first.algorithm, first.mode, first.H, len(rows), **stats,
                        queries_mean=float(q.mean()), queries_total=int(q.sum()))


@dataclass
class ExperimentReport:
    repetitions: list[RepetitionRow] = field(default_factory=list)
    aggregates: list[AggregateRow] = field(default_factory=list)
    comparator: dict = field(default_factory=dict)  # mode -> [BoundaryReport]
    budgets: dict = field(default_factory=dict)  # (mode, H) -> per-boundary budgets
    baselines: list[dict] = field(default_factory=list)

    def get(self, algorithm: str, mode: int, H: int) -> AggregateRow:
        for a in self.aggregates:
            if (a.algorithm, a.mode, a.H) == (algorithm, mode, H):
                return a
        raise KeyError((algorithm, mode, H))

    def rows_for(self, algorithm: str, mode: int, H: int | None = None) -> list[RepetitionRow]:
        return [r for r in self.repetitions
                if r.algorithm == algorithm and r.mode == mode and (H is None or r.H == H)]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if v is None:
        return ""
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _dc_csv(items: Sequence) -> str:
    cls = type(items[0])
    names = [f.name for f in dataclasses.fields(cls)]
    return csv_text(names, ([getattr(it, n) for n in names] for it in items))


def report_files(report: ExperimentReport, scale: OrdinalScale) -> dict[str, str]:
    """File name -> CSV text for everything in the report."""
    files = {}
    for mode, rows in sorted(report.comparator.items()):
        files[f"comparator_mode{mode}.csv"] = csv_text(
            ["boundary_index", "boundary", "n_pairs", "accuracy", "auc", "threshold"],
            ([r.boundary_index, scale.boundaries[r.boundary_index], r.n_pairs, r.accuracy, r.auc,
              r.threshold] for r in rows))
    if report.budgets:
        modes = sorted({m for m, _ in report.budgets})
        for mode in modes:
            hs = sorted(H for m, H in report.budgets if m == mode)
            files[f"budgets_mode{mode}.csv"] = csv_text(
                ["H", *[f"h_{i}" for i in range(scale.n)]],
                ([H, *report.budgets[(mode, H)]] for H in hs))
    keys = sorted({(r.algorithm, r.mode) for r in report.repetitions})
    for alg, mode in keys:
        files[f"repetitions_{alg}_mode{mode}.csv"] = _dc_csv(report.rows_for(alg, mode))
        files[f"aggregate_{alg}_mode{mode}.csv"] = _dc_csv(
            [a for a in report.aggregates if (a.algorithm, a.mode) == (alg, mode)])
    if report.baselines:
        files["baselines.csv"] = csv_text(
            ["method", "acc", "mae", "tau"],
            ([b["method"], b["acc"], b["mae"], b["tau"]] for b in report.baselines))
    return files


def write_files(out_dir, files: dict[str, str]) -> list[Path]:
    """Write all files or none: anything written before a failure is removed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            p = out / name
            with open(p, "w", newline="") as fh:
                fh.write(text)
            written.append(p)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return written


def _sweep(pipe: Pipeline, report: ExperimentReport, modes, algorithms, budgets, repetitions=None):
    for mode in modes:
        if mode in pipe.reports:
            report.comparator[mode] = pipe.reports[mode]
        for H in budgets:
            report.budgets[(mode, H)] = search_budget(H, pipe.aucs(mode))
            for alg in algorithms:
                rows, _ = run_repetitions(pipe, mode, alg, H, repetitions)
                report.repetitions.extend(rows)
                report.aggregates.append(aggregate(rows))
                log.info("%s mode %d H=%d: acc %.4f +- %.4f", alg, mode, H,
                         report.aggregates[-1].acc_mean, report.aggregates[-1].acc_std)


def run_sweep(config: ExperimentConfig, out_dir=None, pipeline: Pipeline | None = None) -> ExperimentReport:
    """Budget sweep for every configured mode and algorithm."""
    pipe = pipeline or prepare(config)
    report = ExperimentReport()
    _sweep(pipe, report, config.modes, config.algorithms, config.budgets)
    if out_dir is not None:
        write_files(out_dir, report_files(report, config.scale))
    return report


@dataclass
class AlgorithmDelta:
    mode: int
    H: int
    acc_delta: float
    mae_delta: float
    tau_delta: float
    acc_std_delta: float
    mae_std_delta: float
    tau_std_delta: float
    queries_nnbs: int
    queries_inbs: int


def compare_algorithms(config: ExperimentConfig, out_dir=None,
                       pipeline: Pipeline | None = None) -> tuple[ExperimentReport, list[AlgorithmDelta]]:
    """NNBS and INBS on the same comparator, splits and seed schedule; deltas are INBS - NNBS."""
    config = config.replace(algorithms=("nnbs", "inbs"))
    pipe = pipeline or prepare(config)
    if pipeline is not None:
        pipe = dataclasses.replace(pipe, config=config)
    report = ExperimentReport()
    _sweep(pipe, report, config.modes, config.algorithms, config.budgets)
    deltas = []
    for mode in config.modes:
        for H in config.budgets:
            a, b = report.get("nnbs", mode, H), report.get("inbs", mode, H)
            deltas.append(AlgorithmDelta(
                mode, H, b.acc_mean - a.acc_mean, b.mae_mean - a.mae_mean, b.tau_mean - a.tau_mean,
                b.acc_std - a.acc_std, b.mae_std - a.mae_std, b.tau_std - a.tau_std,
                a.queries_total, b.queries_total))
    if out_dir is not None:
        files = report_files(report, config.scale)
        files["compare.csv"] = _dc_csv(deltas)
        write_files(out_dir, files)
    return report, deltas


BASELINE_ROWS = (("nnbs", 1), ("nnbs", 2), ("inbs", 2))


@_stage("baselines")
def fit_baselines(pipe: Pipeline) -> list[dict]:
    cfg = pipe.config
    split = pipe.split
    c = cfg.comparator
    opt = cmp.OptimizerParams(c.learning_rate, c.momentum, c.batch_size, c.max_epochs, c.patience,
                              seed=derive_int(cfg.seed, "classifier"))
    X = np.stack([it.features for it in pipe.test])
    truth = categories_of(pipe.scale, [it.latent_value for it in pipe.test])
    # baselines see all of training I, anchors included: same items the comparator was built from
    clf = baselines.train_classifier(split.training_I, pipe.scale, split.validation, opt)
    reg = baselines.train_regressor(split.training_I, pipe.scale)
    out = []
    for name, model in (("classifier", clf), ("regressor", reg)):
        pred = model.predict(X)
        out.append({"method": name, "acc": metrics.accuracy(pred, truth),
                    "mae": metrics.mae(pred, truth), "tau": metrics.kendall_tau(pred, truth)})
    return out


def run_baseline_comparison(config: ExperimentConfig, out_dir=None,
                            pipeline: Pipeline | None = None) -> ExperimentReport:
    """Direct classifier and regressor rows next to NBS rows at H = baseline_budget."""
    H = config.baseline_budget
    modes = sorted({m for _, m in BASELINE_ROWS})
    config = config.replace(modes=tuple(modes), budgets=(H,))
    pipe = pipeline or prepare(config)
    if pipeline is not None:
        pipe = dataclasses.replace(pipe, config=config)
    report = ExperimentReport()
    report.baselines.extend(fit_baselines(pipe))
    for alg, mode in BASELINE_ROWS:
        if mode in pipe.reports:
            report.comparator[mode] = pipe.reports[mode]
        report.budgets[(mode, H)] = search_budget(H, pipe.aucs(mode))
        rows, _ = run_repetitions(pipe, mode, alg, H)
        report.repetitions.extend(rows)
        agg = aggregate(rows)
        report.aggregates.append(agg)
        report.baselines.append({"method": f"{alg}_mode{mode}", "acc": agg.acc_mean,
                                 "mae": agg.mae_mean, "tau": agg.tau_mean})
    if out_dir is not None:
        write_files(out_dir, report_files(report, config.scale))
    return report
