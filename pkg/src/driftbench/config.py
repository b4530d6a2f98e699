"""Experiment configuration: JSON parsing and validation.

Every problem is reported with the JSON path it concerns, e.g.
``$.regimes[1].frequency: expected one of blind, informed``. Relative paths
inside the config resolve against the config file's directory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .detectors import DetectorKind, DetectorSpec
from .fedd import FeddConfig
from .harness import DataKind, DataRegime, FrequencyRegime, scenario_name
from .ingest import SynthSpec

DATASET_KINDS = ("yahoo_a1", "nab_cloudwatch", "synthetic")
BUILTIN_CORPORA = ("maintenance", "drift_monitor")
DRIFT_SUMMARY_MODES = ("per_period", "first_drift")


class ConfigError(ValueError):
    """Raised with one or more ``path: message`` diagnostics."""

    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class DatasetConfig:
    kind: str
    path: Path | None = None
    labels: Path | None = None
    specs: tuple[SynthSpec, ...] = ()
    builtin: dict[str, Any] | None = None


@dataclass(frozen=True)
class RegimeConfig:
    data: DataRegime
    frequency: FrequencyRegime

    @property
    def name(self) -> str:
        return scenario_name(self.data, self.frequency)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    detector: DetectorSpec
    regimes: tuple[RegimeConfig, ...]
    batch_len: int
    delays: tuple[int, ...]
    seeds: tuple[int, ...]
    alpha: float
    output_dir: Path
    fedd: FeddConfig | None = None
    zero_missed: bool = True
    drift_summary_mode: str = "per_period"
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def needs_monitor(self) -> bool:
        return any(r.frequency is FrequencyRegime.INFORMED for r in self.regimes)


def config_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class _Checker:
    def __init__(self) -> None:
        self.problems: list[str] = []

    def fail(self, path: str, msg: str) -> None:
        self.problems.append(f"{path}: {msg}")

    def obj(self, data: Any, path: str) -> dict | None:
        if not isinstance(data, dict):
            self.fail(path, "expected an object")
            return None
        return data

    def int_(self, data: dict, key: str, path: str, *, minimum: int | None = None, default: Any = ...) -> int | None:
        if key not in data:
            if default is ...:
                self.fail(path, f"missing required key {key!r}")
            return None if default is ... else default
        val = data[key]
        if isinstance(val, bool) or not isinstance(val, int):
            self.fail(f"{path}.{key}", "expected an integer")
            return None
        if minimum is not None and val < minimum:
            self.fail(f"{path}.{key}", f"{key} must be ≥ {minimum}")
            return None
        return val

    def unknown(self, data: dict, allowed: set[str], path: str) -> None:
        for key in sorted(set(data) - allowed):
            self.fail(f"{path}.{key}", "unknown key")


def parse_config(text: str, base_dir: Path | str = ".") -> ExperimentConfig:
    """Parse and validate a JSON config. Raises ``ConfigError``."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"$: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc
    base_dir = Path(base_dir)
    ck = _Checker()
    root = ck.obj(raw, "$")
    if root is None:
        raise ConfigError(ck.problems)
    ck.unknown(
        root,
        {"dataset", "detector", "regimes", "batch_len", "delays", "seeds", "alpha", "output_dir", "fedd", "evaluation"},
        "$",
    )

    dataset = _dataset(ck, root, base_dir)
    detector = _detector(ck, root)
    regimes = _regimes(ck, root)
    batch_len = ck.int_(root, "batch_len", "$", minimum=2)
    delays = _int_list(ck, root, "delays", minimum=0)
    seeds = _int_list(ck, root, "seeds", minimum=0, maximum=2**64 - 1)

    alpha = root.get("alpha", 0.10)
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or not 0 < alpha < 1:
        ck.fail("$.alpha", "alpha must be a number in (0, 1)")

    output_dir = root.get("output_dir")
    if "output_dir" not in root:
        ck.fail("$", "missing required key 'output_dir'")
        output_dir = "."
    elif not isinstance(output_dir, str) or not output_dir:
        ck.fail("$.output_dir", "output_dir must be a non-empty string")
        output_dir = "."

    fedd = None
    if "fedd" in root:
        fedd = _fedd(ck, root["fedd"])
    elif regimes and any(r.frequency is FrequencyRegime.INFORMED for r in regimes):
        ck.fail("$", "informed regime requires a 'fedd' section with the drift monitor settings")

    zero_missed, mode = True, "per_period"
    if "evaluation" in root:
        ev = ck.obj(root["evaluation"], "$.evaluation")
        if ev is not None:
            ck.unknown(ev, {"zero_missed", "drift_summary_mode"}, "$.evaluation")
            zero_missed = ev.get("zero_missed", True)
            if not isinstance(zero_missed, bool):
                ck.fail("$.evaluation.zero_missed", "expected true or false")
            mode = ev.get("drift_summary_mode", "per_period")
            if mode not in DRIFT_SUMMARY_MODES:
                ck.fail("$.evaluation.drift_summary_mode", f"expected one of {', '.join(DRIFT_SUMMARY_MODES)}")

    if ck.problems:
        raise ConfigError(ck.problems)
    return ExperimentConfig(
        dataset=dataset,
        detector=detector,
        regimes=tuple(regimes),
        batch_len=batch_len,
        delays=tuple(delays),
        seeds=tuple(seeds),
        alpha=float(alpha),
        output_dir=(base_dir / output_dir),
        fedd=fedd,
        zero_missed=zero_missed,
        drift_summary_mode=mode,
        raw=raw,
    )


def load_config(path: str | Path) -> tuple[ExperimentConfig, str]:
    """Config plus the sha256 of its bytes."""
    path = Path(path)
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError([f"$: config is not UTF-8 ({exc})"]) from exc
    return parse_config(text, path.parent), config_hash(data)


# ------------------------------------------------------------------ sections


def _int_list(ck: _Checker, root: dict, key: str, *, minimum: int, maximum: int | None = None) -> list[int]:
    path = f"$.{key}"
    if key not in root:
        ck.fail("$", f"missing required key {key!r}")
        return []
    val = root[key]
    if not isinstance(val, list) or not val:
        ck.fail(path, f"{key} must be a non-empty list")
        return []
    out = []
    for i, v in enumerate(val):
        if isinstance(v, bool) or not isinstance(v, int):
            ck.fail(f"{path}[{i}]", "expected an integer")
        elif v < minimum or (maximum is not None and v > maximum):
            ck.fail(f"{path}[{i}]", f"out of range [{minimum}, {maximum if maximum is not None else '∞'}]")
        else:
            out.append(v)
    if len(set(out)) != len(out):
        ck.fail(path, f"duplicate entries in {key}")
    return out


def _dataset(ck: _Checker, root: dict, base_dir: Path) -> DatasetConfig | None:
    if "dataset" not in root:
        ck.fail("$", "missing required key 'dataset'")
        return None
    ds = ck.obj(root["dataset"], "$.dataset")
    if ds is None:
        return None
    kind = ds.get("kind")
    if kind not in DATASET_KINDS:
        ck.fail("$.dataset.kind", f"expected one of {', '.join(DATASET_KINDS)}")
        return None
    if kind == "yahoo_a1":
        ck.unknown(ds, {"kind", "path"}, "$.dataset")
        if not isinstance(ds.get("path"), str):
            ck.fail("$.dataset.path", "yahoo_a1 needs a directory path")
            return None
        return DatasetConfig(kind, path=base_dir / ds["path"])
    if kind == "nab_cloudwatch":
        ck.unknown(ds, {"kind", "path", "labels"}, "$.dataset")
        ok = True
        for key in ("path", "labels"):
            if not isinstance(ds.get(key), str):
                ck.fail(f"$.dataset.{key}", f"nab_cloudwatch needs '{key}' as a path")
                ok = False
        return DatasetConfig(kind, path=base_dir / ds["path"], labels=base_dir / ds["labels"]) if ok else None

    ck.unknown(ds, {"kind", "specs", "specs_file", "builtin"}, "$.dataset")
    sources = [k for k in ("specs", "specs_file", "builtin") if k in ds]
    if len(sources) != 1:
        ck.fail("$.dataset", "synthetic datasets need exactly one of 'specs', 'specs_file' or 'builtin'")
        return None
    if "builtin" in ds:
        b = ck.obj(ds["builtin"], "$.dataset.builtin")
        if b is None:
            return None
        if b.get("name") not in BUILTIN_CORPORA:
            ck.fail("$.dataset.builtin.name", f"expected one of {', '.join(BUILTIN_CORPORA)}")
            return None
        ck.unknown(b, {"name", "n_series", "base_seed", "drift"}, "$.dataset.builtin")
        ck.int_(b, "n_series", "$.dataset.builtin", minimum=1, default=None)
        ck.int_(b, "base_seed", "$.dataset.builtin", minimum=0, default=None)
        if "drift" in b and not isinstance(b["drift"], bool):
            ck.fail("$.dataset.builtin.drift", "expected true or false")
        return DatasetConfig(kind, builtin=dict(b))
    if "specs_file" in ds:
        if not isinstance(ds["specs_file"], str):
            ck.fail("$.dataset.specs_file", "expected a path")
            return None
        return DatasetConfig(kind, path=base_dir / ds["specs_file"])
    items = ds["specs"]
    if not isinstance(items, list) or not items:
        ck.fail("$.dataset.specs", "expected a non-empty list of series specs")
        return None
    specs = []
    for i, item in enumerate(items):
        try:
            specs.append(SynthSpec.from_dict(item))
        except (TypeError, ValueError, AttributeError) as exc:
            ck.fail(f"$.dataset.specs[{i}]", str(exc))
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        ck.fail("$.dataset.specs", "series ids must be unique")
    return DatasetConfig(kind, specs=tuple(specs))


def _detector(ck: _Checker, root: dict) -> DetectorSpec | None:
    if "detector" not in root:
        ck.fail("$", "missing required key 'detector'")
        return None
    d = ck.obj(root["detector"], "$.detector")
    if d is None:
        return None
    ck.unknown(d, {"kind", "params"}, "$.detector")
    kind = d.get("kind")
    if kind not in {k.value for k in DetectorKind}:
        ck.fail("$.detector.kind", f"expected one of {', '.join(k.value for k in DetectorKind)}")
        return None
    params = d.get("params", {})
    if not isinstance(params, dict):
        ck.fail("$.detector.params", "expected an object")
        return None
    try:
        return DetectorSpec.create(kind, params)
    except (TypeError, ValueError) as exc:
        ck.fail("$.detector.params", str(exc))
        return None


def _regimes(ck: _Checker, root: dict) -> list[RegimeConfig]:
    if "regimes" not in root:
        ck.fail("$", "missing required key 'regimes'")
        return []
    items = root["regimes"]
    if not isinstance(items, list) or not items:
        ck.fail("$.regimes", "regimes must be a non-empty list")
        return []
    out = []
    for i, item in enumerate(items):
        path = f"$.regimes[{i}]"
        r = ck.obj(item, path)
        if r is None:
            continue
        ck.unknown(r, {"data", "frequency", "window_len"}, path)
        data = r.get("data")
        if data not in {k.value for k in DataKind}:
            ck.fail(f"{path}.data", f"expected one of {', '.join(k.value for k in DataKind)}")
            continue
        freq = r.get("frequency", "blind")
        if freq not in {f.value for f in FrequencyRegime}:
            ck.fail(f"{path}.frequency", f"expected one of {', '.join(f.value for f in FrequencyRegime)}")
            continue
        window = ck.int_(r, "window_len", path, minimum=2, default=None)
        if window is not None and data != DataKind.SLIDING_WINDOW.value:
            ck.fail(f"{path}.window_len", "window_len only applies to sliding_window")
            continue
        out.append(RegimeConfig(DataRegime(DataKind(data), window), FrequencyRegime(freq)))
    names = [r.name for r in out]
    for name in sorted({n for n in names if names.count(n) > 1}):
        ck.fail("$.regimes", f"scenario {name!r} listed twice")
    return out


def _fedd(ck: _Checker, data: Any) -> FeddConfig | None:
    f = ck.obj(data, "$.fedd")
    if f is None:
        return None
    fields = set(FeddConfig.__dataclass_fields__)
    ck.unknown(f, fields, "$.fedd")
    try:
        return FeddConfig(**{k: v for k, v in f.items() if k in fields})
    except (TypeError, ValueError) as exc:
        ck.fail("$.fedd", str(exc))
        return None
