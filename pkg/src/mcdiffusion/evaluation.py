"""Error metrics, averaged multi-run experiments, density sweeps and CSV reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .channels import build_channel_graph
from .predictor import PredictorOptions, predict_probe
from .ratings import RNG_NAME, DataError, InvariantError, RatingsDataset, compute_user_means, split_dataset
from .similarity import DIFFUSION, METHODS, PEARSON, diffusion_similarity, pearson_similarity

log = logging.getLogger(__name__)

DEFAULT_SEEDS = (1, 2, 3, 4, 5)
DENSITY_GRID = tuple(range(10, 100, 10))
REPORT_COLUMNS = ["dataset", "method", "p", "run", "seed", "probe_size", "mae", "rmse", "fallback_fraction"]


def _residuals(predicted, truth) -> np.ndarray:
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape:
        raise ValueError(f"misaligned predictions {predicted.shape} and probe {truth.shape}")
    if predicted.size == 0:
        raise ValueError("metrics are undefined on an empty probe")
    return truth - predicted


def mae(predicted, truth) -> float:
    """Mean absolute error."""
    return float(np.mean(np.abs(_residuals(predicted, truth))))


def rmse(predicted, truth) -> float:
    res = np.abs(_residuals(predicted, truth))
    # scale first so tiny residuals do not underflow when squared
    top = res.max()
    if top == 0.0:
        return 0.0
    return float(top * math.sqrt(np.mean(np.square(res / top))))


@dataclass(frozen=True)
class MetricPair:
    mae: float
    rmse: float
    probe_size: int
    fallback_fraction: float


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that can change a result. Thread count is deliberately absent."""

    kappa: str = "signed"
    clamp: bool = True
    pearson_mean: str = "common"
    pearson_min_common: int = 2
    top_k: int | None = None

    @property
    def predictor(self) -> PredictorOptions:
        return PredictorOptions(kappa=self.kappa, clamp=self.clamp, top_k=self.top_k)


@dataclass(frozen=True)
class RunResult:
    seed: int
    run_index: int
    metrics: MetricPair


@dataclass(frozen=True)
class EvaluationReport:
    dataset: str
    method: str
    p: int
    per_run: tuple[RunResult, ...]
    mean: MetricPair
    config: dict = field(default_factory=dict)


def _average(runs) -> MetricPair:
    k = len(runs)
    return MetricPair(
        mae=math.fsum(r.metrics.mae for r in runs) / k,
        rmse=math.fsum(r.metrics.rmse for r in runs) / k,
        probe_size=round(sum(r.metrics.probe_size for r in runs) / k),
        fallback_fraction=math.fsum(r.metrics.fallback_fraction for r in runs) / k,
    )


def evaluate_split(split, method: str, config: ExperimentConfig = ExperimentConfig(), threads: int = 1):
    """Similarity on the training part, predictions on the probe. Returns (metrics, predictions)."""
    train = split.train
    if method == DIFFUSION:
        S = diffusion_similarity(build_channel_graph(train), threads=threads)
    elif method == PEARSON:
        S = pearson_similarity(
            train, mean=config.pearson_mean, min_common=config.pearson_min_common, threads=threads
        )
    else:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    preds = predict_probe(split, S, compute_user_means(train), config.predictor)
    metrics = MetricPair(
        mae=mae(preds.value, preds.truth),
        rmse=rmse(preds.value, preds.truth),
        probe_size=len(preds),
        fallback_fraction=preds.fallback_fraction,
    )
    # power-mean inequality, with one part in 1e12 of slack for rounding
    if metrics.rmse < metrics.mae * (1 - 1e-12):
        raise InvariantError(f"rmse {metrics.rmse} < mae {metrics.mae}")
    return metrics, preds


def _run_cell(dataset, method, p, seed, run_index, config, threads):
    try:
        # the partition depends on the seed alone, so repeated seeds repeat a run exactly
        split = split_dataset(dataset, p, seed, run_index=0)
        metrics, _ = evaluate_split(split, method, config, threads)
    except DataError as exc:
        raise DataError(f"{method} p={p} run={run_index} seed={seed}: {exc}") from exc
    log.info("%s p=%d run=%d seed=%d mae=%.4f rmse=%.4f", method, p, run_index, seed, metrics.mae, metrics.rmse)
    return RunResult(seed, run_index, metrics)


def config_snapshot(config: ExperimentConfig, **extra) -> dict:
    snap = asdict(config)
    snap["rng"] = RNG_NAME
    snap.update(extra)
    return snap


def run_experiment(
    dataset: RatingsDataset,
    method: str,
    p: int = 10,
    seeds=DEFAULT_SEEDS,
    config: ExperimentConfig = ExperimentConfig(),
    dataset_tag: str = "dataset",
    threads: int = 1,
) -> EvaluationReport:
    """Average MAE/RMSE over one independent random split per seed."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    runs = tuple(
        _run_cell(dataset, method, p, seed, k, config, threads) for k, seed in enumerate(seeds)
    )
    return EvaluationReport(dataset_tag, method, p, runs, _average(runs), config_snapshot(config))


def density_sweep(
    dataset: RatingsDataset,
    methods=METHODS,
    p_values=DENSITY_GRID,
    seeds=DEFAULT_SEEDS,
    config: ExperimentConfig = ExperimentConfig(),
    dataset_tag: str = "dataset",
    threads: int = 1,
) -> list[EvaluationReport]:
    """One averaged report per (method, p), ordered by method then p.

    Runs are independent and may execute on ``threads`` workers; results are
    merged by (method, p, run) so the output does not depend on the worker count.
    """
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    cells = [(mth, p, k, s) for mth in methods for p in p_values for k, s in enumerate(seeds)]

    def work(cell):
        mth, p, k, s = cell
        return _run_cell(dataset, mth, p, s, k, config, 1)

    if threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(c) for c in cells]
    by_key = {(c[0], c[1], c[2]): r for c, r in zip(cells, results)}
    reports = []
    snap = config_snapshot(config)
    for mth in methods:
        for p in p_values:
            runs = tuple(by_key[(mth, p, k)] for k in range(len(seeds)))
            reports.append(EvaluationReport(dataset_tag, mth, p, runs, _average(runs), snap))
    return reports


def _fmt(x: float) -> str:
    return repr(float(x))


def report_rows(reports) -> list[list]:
    rows = []
    for rep in reports:
        for run in rep.per_run:
            m = run.metrics
            rows.append(
                [rep.dataset, rep.method, rep.p, run.run_index, run.seed, m.probe_size,
                 _fmt(m.mae), _fmt(m.rmse), _fmt(m.fallback_fraction)]
            )
        m = rep.mean
        rows.append(
            [rep.dataset, rep.method, rep.p, "mean", "", m.probe_size,
             _fmt(m.mae), _fmt(m.rmse), _fmt(m.fallback_fraction)]
        )
    return rows


def render_report_csv(reports, config: dict | None = None) -> str:
    """Long-format report. A leading ``# config:`` comment line carries the resolved config."""
    buf = io.StringIO()
    if config is not None:
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    w.writerows(report_rows(reports))
    return buf.getvalue()


def render_wide_csv(reports, config: dict | None = None) -> str:
    """One row per p, ``<method>_mae``/``<method>_rmse`` columns, for re-plotting sweeps."""
    methods = list(dict.fromkeys(r.method for r in reports))
    ps = sorted({r.p for r in reports})
    cell = {(r.method, r.p): r.mean for r in reports}
    buf = io.StringIO()
    if config is not None:
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p"] + [f"{m}_{k}" for m in methods for k in ("mae", "rmse")])
    for p in ps:
        row = [p]
        for m in methods:
            mp = cell.get((m, p))
            row += [_fmt(mp.mae), _fmt(mp.rmse)] if mp else ["", ""]
        w.writerow(row)
    return buf.getvalue()


def read_report_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def summary_table(reports) -> str:
    """Table-1 shaped plain-text summary."""
    lines = [f"{'dataset':<12}{'method':<12}{'p':>4}{'RMSE':>10}{'MAE':>10}{'fallback':>10}"]
    for r in reports:
        m = r.mean
        lines.append(
            f"{r.dataset:<12}{r.method:<12}{r.p:>4}{m.rmse:>10.4f}{m.mae:>10.4f}{m.fallback_fraction:>10.4f}"
        )
    return "\n".join(lines)
