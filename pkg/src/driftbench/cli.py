"""``driftbench`` command line: validate, run, compare, synth.

Exit codes: 0 success, 1 configuration or usage error, 2 data error,
3 run finished with some series failing.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__, corpora
from .config import ConfigError, load_config
from .ingest import DataError, generate_synthetic, load_synth_specs, write_yahoo_csv
from .runner import EXIT_CONFIG, EXIT_DATA, EXIT_OK, compare_metric, execute, json_text

logger = logging.getLogger("driftbench")

METRICS = ("precision", "recall", "f1")


def configure_logging() -> None:
    level = os.environ.get("DRIFTBENCH_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _error(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        load_config(args.config)
    except FileNotFoundError:
        _error(f"{args.config}: no such file")
        return EXIT_CONFIG
    except ConfigError as exc:
        for p in exc.problems:
            _error(p)
        return EXIT_CONFIG
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    if args.jobs < 1:
        _error("--jobs must be >= 1")
        return EXIT_CONFIG
    try:
        config, digest = load_config(args.config)
    except FileNotFoundError:
        _error(f"{args.config}: no such file")
        return EXIT_CONFIG
    except ConfigError as exc:
        for p in exc.problems:
            _error(p)
        return EXIT_CONFIG
    out = Path(args.output) if args.output else None
    code = execute(config, digest, jobs=args.jobs, output_dir=out)
    if code == EXIT_DATA:
        _error("dataset could not be loaded; nothing was written")
    return code


def _load_summary(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("per_series"), dict):
        raise DataError(f"{path}: not a summary report (missing 'per_series')")
    return data


def cmd_compare(args: argparse.Namespace) -> int:
    """Pair the two reports series by series, per scenario and metric."""
    if not 0 < args.alpha < 1:
        _error("--alpha must be in (0, 1)")
        return EXIT_CONFIG
    try:
        a, b = _load_summary(args.report_a), _load_summary(args.report_b)
    except DataError as exc:
        _error(str(exc))
        return EXIT_DATA
    scenarios = [s for s in a["per_series"] if s in b["per_series"]]
    if not scenarios:
        _error("the reports share no scenario")
        return EXIT_DATA
    for s in scenarios:
        ids_a, ids_b = set(a["per_series"][s]), set(b["per_series"][s])
        if ids_a != ids_b:
            diff = sorted(ids_a ^ ids_b)
            _error(f"scenario {s}: series sets differ: {', '.join(diff)}")
            return EXIT_DATA
    result = []
    for s in scenarios:
        for m in METRICS:
            entry = compare_metric(a["per_series"][s], b["per_series"][s], m, args.alpha, (args.report_a, args.report_b))
            result.append({"scenario": s, "metric": m, **entry})
    sys.stdout.write(json_text({"alpha": args.alpha, "comparisons": result}))
    if all(r["error"] for r in result):
        _error(result[0]["error"])
        return EXIT_DATA
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        specs = load_synth_specs(args.spec)
    except OSError as exc:
        _error(f"{args.spec}: {exc.strerror or exc}")
        return EXIT_DATA
    except json.JSONDecodeError as exc:
        _error(f"{args.spec}: invalid JSON at line {exc.lineno}, column {exc.colno}")
        return EXIT_CONFIG
    except (TypeError, ValueError, KeyError, AttributeError) as exc:
        _error(f"{args.spec}: invalid series spec: {exc}")
        return EXIT_CONFIG
    if args.run_seed is not None:
        specs = [replace(s, seed=corpora.series_seed(s.seed, args.run_seed)) for s in specs]
    out = Path(args.out)
    if len(specs) == 1 and out.suffix == ".csv":
        out.parent.mkdir(parents=True, exist_ok=True)
        write_yahoo_csv(generate_synthetic(specs[0]), out)
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        write_yahoo_csv(generate_synthetic(spec), out / f"{spec.id}.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run an experiment and write reports")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (outputs do not depend on it)")
    p.add_argument("--output", help="override output_dir from the config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="paired Wilcoxon test between two summary.json reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--alpha", type=float, default=0.10)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate Yahoo-format CSV from series specs")
    p.add_argument("spec")
    p.add_argument("--out", required=True, help="CSV file for a single spec, else a directory")
    p.add_argument("--run-seed", type=int, default=None, help="mix a run seed in, as `run` does")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
