"""Experiment runner: dataset -> regime runs -> reports on disk.

Series are independent, so they may run in worker processes; results are
collected in dataset order and every output is sorted by series id, which
keeps report bodies identical for any ``jobs`` value.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, corpora
from .config import ExperimentConfig
from .evaluation import (
    ComparisonResult,
    InsufficientPairs,
    MetricTriple,
    adjust_predictions,
    aggregate,
    confusion,
    drift_period_summary,
    metrics,
    wilcoxon_signed_rank,
)
from .fedd import DriftSignal, FeddConfig, fedd_monitor
from .harness import FrequencyRegime, RunRecord, SeriesRunError, run_series
from .ingest import DataError, generate_synthetic, load_nab_cloudwatch, load_synth_specs, load_yahoo_a1
from .series import LabeledSeries, make_batches, split_half

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3

PER_SERIES_HEADER = ("series_id", "scenario", "batch", "tp", "fp", "fn", "tn", "precision", "recall", "f1")
DELAY_CURVE_HEADER = ("scenario", "delay", "precision", "recall", "f1")
DRIFT_SUMMARY_HEADER = ("period", "fraction")
DRIFT_SIGNALS_HEADER = ("series_id", "batch_index", "status")
RETRAIN_HEADER = ("series_id", "batch_index", "trigger", "train_start", "train_end")
COMPARISON_KEYS = ("a", "b", "W", "p", "significant", "n", "method", "direction", "error")


# ------------------------------------------------------------------ dataset


def load_dataset(config: ExperimentConfig, run_seed: int) -> list[LabeledSeries]:
    """Load or generate the corpus. Synthetic corpora mix ``run_seed`` into every series seed."""
    ds = config.dataset
    if ds.kind == "yahoo_a1":
        return load_yahoo_a1(ds.path)
    if ds.kind == "nab_cloudwatch":
        return load_nab_cloudwatch(ds.path, ds.labels)
    if ds.builtin is not None:
        b = ds.builtin
        base = corpora.series_seed(b.get("base_seed", 0), run_seed)
        n = b.get("n_series")
        if b["name"] == "maintenance":
            specs = corpora.maintenance_specs(n or 30, drift=b.get("drift", True), base_seed=base)
        else:
            specs = corpora.drift_monitor_specs(n or 20, shifted=b.get("drift", False), base_seed=base)
        return corpora.build(specs)
    if ds.path is not None:
        try:
            specs = load_synth_specs(ds.path)
        except OSError as exc:
            raise DataError(f"{ds.path}: {exc.strerror or exc}") from exc
        except (ValueError, TypeError, KeyError) as exc:
            raise DataError(f"{ds.path}: invalid series spec: {exc}") from exc
    else:
        specs = list(ds.specs)
    return [generate_synthetic(replace(s, seed=corpora.series_seed(s.seed, run_seed))) for s in specs]


# ----------------------------------------------------------------- running


@dataclass
class SeriesOutcome:
    series_id: str
    labels: np.ndarray
    records: dict[str, RunRecord] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    signals: list[DriftSignal] | None = None


def run_one(series: LabeledSeries, config: ExperimentConfig, seed: int) -> SeriesOutcome:
    out = SeriesOutcome(series.id, series.labels)
    signals = None
    if config.needs_monitor:
        try:
            train, test = split_half(series)
            signals = fedd_monitor(series, train, make_batches(test, config.batch_len), config.fedd or FeddConfig())
            out.signals = signals
        except Exception as exc:  # recorded per series, never fatal
            msg = str(SeriesRunError(series.id, None, exc))
            logger.error("%s", msg)
            for r in config.regimes:
                out.errors[r.name] = msg
            return out
    for regime in config.regimes:
        try:
            out.records[regime.name] = run_series(
                series,
                config.detector,
                regime.data,
                regime.frequency,
                config.batch_len,
                drift_signals=signals if regime.frequency is FrequencyRegime.INFORMED else None,
                seed=seed,
            )
        except Exception as exc:
            msg = str(exc) if isinstance(exc, SeriesRunError) else str(SeriesRunError(series.id, None, exc))
            logger.error("%s", msg)
            out.errors[regime.name] = msg
    return out


def _run_star(args: tuple) -> SeriesOutcome:
    return run_one(*args)


def run_all(series: Sequence[LabeledSeries], config: ExperimentConfig, seed: int, jobs: int = 1) -> list[SeriesOutcome]:
    tasks = [(s, config, seed) for s in series]
    if jobs <= 1 or len(tasks) <= 1:
        return [run_one(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_star, tasks, chunksize=1))


# ----------------------------------------------------------------- reports


@dataclass
class Report:
    per_series_rows: list[tuple]
    delay_rows: list[tuple]
    drift_summary_rows: list[tuple]
    drift_signal_rows: list[tuple]
    retrain_rows: dict[str, list[tuple]]
    summary: dict
    failures: list[dict]


def _fmt(x: float) -> str:
    return repr(float(x))


def build_report(outcomes: Sequence[SeriesOutcome], config: ExperimentConfig) -> Report:
    outcomes = sorted(outcomes, key=lambda o: o.series_id)
    scen = [r.name for r in config.regimes]
    primary = config.delays[0]
    zm = config.zero_missed

    per_series_rows, failures = [], []
    per_series: dict[str, dict[str, MetricTriple]] = {s: {} for s in scen}
    curves: dict[str, dict[int, list[MetricTriple]]] = {s: {d: [] for d in config.delays} for s in scen}
    retrain_rows: dict[str, list[tuple]] = {s: [] for s in scen}

    for o in outcomes:
        for name in scen:
            if name in o.errors:
                failures.append({"series_id": o.series_id, "scenario": name, "error": o.errors[name]})
                continue
            rec = o.records[name]
            test = rec.test_range
            labels = o.labels[test.start : test.stop]
            preds = rec.all_predictions()
            for d in config.delays:
                curves[name][d].append(metrics(confusion(labels, adjust_predictions(labels, preds, d, zero_missed=zm))))
            adjusted = adjust_predictions(labels, preds, primary, zero_missed=zm)
            for b in rec.batches:
                sl = slice(b.start - test.start, b.end - test.start)
                c = confusion(labels[sl], adjusted[sl])
                m = metrics(c)
                per_series_rows.append((o.series_id, name, str(b.index), c.tp, c.fp, c.fn, c.tn, *map(_fmt, (m.precision, m.recall, m.f1))))
            c = confusion(labels, adjusted)
            m = metrics(c)
            per_series[name][o.series_id] = m
            per_series_rows.append((o.series_id, name, "all", c.tp, c.fp, c.fn, c.tn, *map(_fmt, (m.precision, m.recall, m.f1))))
            for e in rec.events:
                retrain_rows[name].append((o.series_id, e.batch_index, e.trigger.value, e.train_range.start, e.train_range.stop))

    delay_rows = []
    for name in scen:
        for d in config.delays:
            if curves[name][d]:
                m = aggregate(curves[name][d])
                delay_rows.append((name, d, *map(_fmt, (m.precision, m.recall, m.f1))))

    signals = {o.series_id: o.signals for o in outcomes if o.signals is not None}
    drift_signal_rows = [(sid, s.batch_index, s.status.value) for sid, sigs in signals.items() for s in sigs]
    drift_summary_rows = [(p, _fmt(f)) for p, f in drift_period_summary(signals, config.drift_summary_mode)] if signals else []

    comparisons = []
    for i, a in enumerate(scen):
        for b in scen[i + 1 :]:
            comparisons.append(compare_metric(per_series[a], per_series[b], "f1", config.alpha, (a, b)))

    summary = {
        "detector": config.detector.to_dict(),
        "delay": primary,
        "alpha": config.alpha,
        "scenarios": {
            name: {**aggregate(list(per_series[name].values())).as_dict(), "n_series": len(per_series[name])}
            if per_series[name]
            else {"precision": None, "recall": None, "f1": None, "n_series": 0}
            for name in scen
        },
        "per_series": {name: {sid: m.as_dict() for sid, m in per_series[name].items()} for name in scen},
        "comparisons": comparisons,
    }
    return Report(per_series_rows, delay_rows, drift_summary_rows, drift_signal_rows, retrain_rows, summary, failures)


def compare_metric(
    a: dict[str, MetricTriple | dict], b: dict[str, MetricTriple | dict], metric: str, alpha: float, names: tuple[str, str]
) -> dict:
    """Paired Wilcoxon comparison over the series both sides share."""

    def get(m):
        return m[metric] if isinstance(m, dict) else getattr(m, metric)

    common = sorted(set(a) & set(b))
    entry = dict.fromkeys(COMPARISON_KEYS)
    entry.update(a=names[0], b=names[1], significant=False)
    try:
        res: ComparisonResult = wilcoxon_signed_rank(
            [get(a[s]) for s in common], [get(b[s]) for s in common], alpha, names=names
        )
    except InsufficientPairs as exc:
        entry["error"] = str(exc)
        return entry
    entry.update(res.as_dict())
    entry["error"] = None
    return entry


# ------------------------------------------------------------------ writers


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def report_files(report: Report) -> dict[str, str]:
    files = {
        "per_series.csv": _csv_text(PER_SERIES_HEADER, report.per_series_rows),
        "summary.json": json_text(report.summary),
        "delay_curve.csv": _csv_text(DELAY_CURVE_HEADER, report.delay_rows),
        "drift_summary.csv": _csv_text(DRIFT_SUMMARY_HEADER, report.drift_summary_rows),
        "drift_signals.csv": _csv_text(DRIFT_SIGNALS_HEADER, report.drift_signal_rows),
    }
    for name, rows in report.retrain_rows.items():
        files[f"retrain_events_{name}.csv"] = _csv_text(RETRAIN_HEADER, rows)
    return files


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def execute(config: ExperimentConfig, config_sha256: str, *, jobs: int = 1, output_dir: Path | None = None) -> int:
    """Run the experiment and write every report. Returns the exit code.

    Datasets are loaded before anything is written, so a data error leaves
    no partial outputs behind.
    """
    out_dir = Path(output_dir) if output_dir is not None else config.output_dir
    started = _now()
    real_data = config.dataset.kind != "synthetic"
    seeds = config.seeds[:1] if real_data else config.seeds
    if real_data and len(config.seeds) > 1:
        logger.info("real dataset: seeds do not affect the run, using seed %d only", seeds[0])

    try:
        corpora_by_seed = {seed: load_dataset(config, seed) for seed in seeds}
    except DataError as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    except OSError as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA

    per_seed_dirs = len(seeds) > 1
    written: dict[Path, str] = {}
    runs, failed = [], 0
    for seed in seeds:
        outcomes = run_all(corpora_by_seed[seed], config, seed, jobs)
        report = build_report(outcomes, config)
        target = out_dir / f"seed-{seed}" if per_seed_dirs else out_dir
        for name, text in report_files(report).items():
            written[target / name] = text
        failed += len(report.failures)
        for o in sorted(outcomes, key=lambda o: o.series_id):
            for r in config.regimes:
                runs.append(
                    {
                        "seed": seed,
                        "series_id": o.series_id,
                        "scenario": r.name,
                        "status": "failed" if r.name in o.errors else "ok",
                        "error": o.errors.get(r.name),
                    }
                )

    code = EXIT_PARTIAL if failed else EXIT_OK
    manifest = {
        "config_sha256": config_sha256,
        "toolkit_version": __version__,
        "started_at": started,
        "finished_at": _now(),
        "seeds": list(seeds),
        "exit_code": code,
        "outputs": sorted(str(p.relative_to(out_dir)) for p in written),
        "runs": runs,
    }
    written[out_dir / "manifest.json"] = json_text(manifest)
    for path, text in written.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    if failed:
        logger.warning("%d series/scenario runs failed; see manifest.json", failed)
    return code
