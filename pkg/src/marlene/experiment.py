"""Prequential experiment runner.

Target events are tested, scored and then learned; source events are only
learned.  A run stops as soon as the target stream is exhausted.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import shutil
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .br import BRMarlene
from .brpw import MAX_PAIRWISE_LABELS, NORMALIZED, RAW_SUM, BRPWMarlene, ScalabilityError
from .drift import DriftConfig
from .learners import LearnerConfig
from .metrics import SNAPSHOT_FIELDS, LabelCurves, WindowEvaluator, window_length
from .stream import (
    TARGET,
    DatasetMeta,
    InterleavePolicy,
    StreamId,
    interleave,
    load_dataset,
    read_schedule_order,
)
from .synth import SynthConfig, reset_steps, synth_generate

BR, BRPW, DUMMY = "BR", "BRPW", "DummyMajority"
ALGORITHMS = (BR, BRPW, DUMMY)
METRICS = SNAPSHOT_FIELDS[1:]
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class DummyMajority:
    """Predicts, per label, the majority class of the target examples seen so
    far (ties and the empty start predict 0)."""

    def __init__(self, n_labels: int):
        self.pos = np.zeros(n_labels, dtype=np.int64)
        self.n = 0

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]:
        y_hat = (2 * self.pos > self.n).astype(np.int8)
        scores = np.stack([1 - y_hat, y_hat], axis=1).astype(float)
        return scores, y_hat

    def observe(self, event) -> None:
        stream, inst = event
        if stream.is_target:
            self.pos += inst.y
            self.n += 1


@dataclass
class ExperimentConfig:
    """Everything a run needs.  Exactly one of ``data`` and ``synth`` is set."""

    data: str | None = None
    sources: tuple[str, ...] = ()
    synth: SynthConfig | None = None
    algorithm: str = BR
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    drift: DriftConfig = field(default_factory=DriftConfig)
    window_fraction: float = 0.1
    seeds: tuple[int, ...] = (0,)
    output_dir: str | None = None
    policy: str = InterleavePolicy.ROUND_ROBIN.value
    schedule: str | None = None
    combine: str = NORMALIZED
    force: bool = False
    max_members_per_lineage: int | None = None
    max_target: int | None = None
    aswr_every: int = 50
    per_label: bool = False

    def validate(self) -> "ExperimentConfig":
        if (self.data is None) == (self.synth is None):
            raise ConfigError("set exactly one of 'data' (a dataset path) and 'synth'")
        if self.synth is not None and self.sources:
            raise ConfigError("'sources' files apply to 'data' runs; synthetic sources go in synth.sources")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {', '.join(ALGORITHMS)}, got {self.algorithm!r}")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ConfigError(f"window_fraction must lie in (0, 1], got {self.window_fraction}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.combine not in (NORMALIZED, RAW_SUM):
            raise ConfigError(f"combine must be {NORMALIZED!r} or {RAW_SUM!r}")
        if self.aswr_every < 1:
            raise ConfigError("aswr_every must be positive")
        InterleavePolicy(self.policy)
        return self

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["sources"] = list(self.sources)
        d["seeds"] = list(self.seeds)
        if self.synth is not None:
            d["synth"]["sources"] = list(self.synth.sources)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            if d.get("synth") is not None:
                s = dict(d["synth"])
                s["sources"] = tuple(s.get("sources", ()))
                d["synth"] = SynthConfig(**s)
            if "learner" in d:
                d["learner"] = LearnerConfig(**d["learner"])
            if "drift" in d:
                d["drift"] = DriftConfig(**d["drift"])
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        for key in ("sources", "seeds"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class SeedResult:
    seed: int
    snapshots: np.ndarray  # (T, 5) windowed metrics per target step
    label_curves: np.ndarray | None  # (T, L) per-label prequential G-Mean (synthetic runs)
    aswr: list[tuple]  # (target step, aswr[, aswr_pw])
    drift_log: list[tuple]  # (event, stream, unit, step)
    member_counts: dict[str, int]
    timing: dict[str, float]
    window_label_gmean: np.ndarray | None = None  # (T, L) when per_label is on

    def final(self) -> dict[str, float]:
        return dict(zip(METRICS, map(float, self.snapshots[-1])))

    def mean(self) -> dict[str, float]:
        return dict(zip(METRICS, map(float, self.snapshots.mean(axis=0))))


@dataclass
class RunResult:
    config: ExperimentConfig
    runs: list[SeedResult]
    meta: DatasetMeta

    def summary(self) -> dict[str, dict[str, float]]:
        """Mean and standard deviation over seeds of each run's average
        windowed metric, plus per-seed runtime."""
        out = {}
        for name in METRICS:
            vals = [r.mean()[name] for r in self.runs]
            out[name] = {"mean": statistics.fmean(vals),
                         "stdev": statistics.stdev(vals) if len(vals) > 1 else 0.0}
        secs = [sum(r.timing.values()) for r in self.runs]
        out["runtime_s"] = {"mean": statistics.fmean(secs),
                            "stdev": statistics.stdev(secs) if len(secs) > 1 else 0.0}
        return out


def _load(cfg: ExperimentConfig, seed: int):
    if cfg.synth is not None:
        synth = dataclasses.replace(cfg.synth, seed=seed)
        data = synth_generate(synth)
        return data.meta, data.target, data.sources, data.drifts, [data.meta] * len(data.sources)
    try:
        meta, target = load_dataset(cfg.data)
        loaded = [load_dataset(p) for p in cfg.sources]
    except OSError as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from exc
    return meta, target, [s for _, s in loaded], [], [m for m, _ in loaded]


def _make_model(cfg: ExperimentConfig, seed: int, meta: DatasetMeta, source_metas):
    if cfg.algorithm == DUMMY:
        return DummyMajority(meta.n_labels)
    if cfg.algorithm == BR:
        ens = BRMarlene(cfg.learner, cfg.drift, seed, cfg.max_members_per_lineage)
    else:
        ens = BRPWMarlene(cfg.learner, cfg.drift, seed, cfg.max_members_per_lineage,
                          combine=cfg.combine, force=cfg.force)
    ens.register_stream(TARGET, meta.n_labels, meta.binary_mask)
    for k, m in enumerate(source_metas, start=1):
        ens.register_stream(StreamId.source(k), m.n_labels, m.binary_mask)
    return ens


def run_seed(cfg: ExperimentConfig, seed: int) -> tuple[SeedResult, DatasetMeta]:
    timing = {"parse": 0.0, "predict": 0.0, "evaluate": 0.0, "train": 0.0}
    clock = time.perf_counter
    t0 = clock()
    meta, target, sources, drifts, source_metas = _load(cfg, seed)
    if cfg.max_target is not None:
        target = target[: cfg.max_target]
    if not target:
        raise ConfigError("the target stream is empty")
    order = None
    if cfg.schedule is not None:
        order = read_schedule_order(Path(cfg.schedule).read_text(encoding="utf-8"))
    schedule = interleave(target, sources, cfg.policy, seed, order)
    timing["parse"] = clock() - t0

    model = _make_model(cfg, seed, meta, source_metas)
    L, T = meta.n_labels, len(target)
    evaluator = WindowEvaluator(L, window_length(T, cfg.window_fraction))
    # per-label prequential G-Mean, reset at each ground-truth drift (synthetic runs)
    curves = LabelCurves(L, reset_steps(drifts)) if cfg.synth is not None else None
    snaps = np.empty((T, len(METRICS)))
    curve_rows = np.empty((T, L)) if curves is not None else None
    label_rows = np.empty((T, L)) if cfg.per_label else None
    aswr_trace = []
    step = 0
    for stream, inst in schedule:
        if stream.is_target:
            t0 = clock()
            _, y_hat = model.predict(inst.x)
            t1 = clock()
            snap = evaluator.step(y_hat, inst.y)
            snaps[step] = snap.as_row()[1:]
            if label_rows is not None:
                label_rows[step] = evaluator.per_label_gmean()
            if curves is not None:
                curve_rows[step] = curves.step(y_hat, inst.y)
            t2 = clock()
            timing["predict"] += t1 - t0
            timing["evaluate"] += t2 - t1
        t0 = clock()
        model.observe((stream, inst))
        timing["train"] += clock() - t0
        if stream.is_target:
            step += 1
            if step % cfg.aswr_every == 0 and not isinstance(model, DummyMajority):
                row = (step, model.aswr())
                if isinstance(model, BRPWMarlene):
                    row += (model.aswr_pw(),)
                aswr_trace.append(row)
            if step == T:
                break

    if isinstance(model, DummyMajority):
        drift_log, counts = [], {}
    else:
        ensembles = [model.br, model.pw] if isinstance(model, BRPWMarlene) else [model]
        drift_log = [tuple(d) for e in ensembles for d in e.drift_log]
        counts = {f"{s}:{_unit_str(u)}": n for e in ensembles for (s, u), n in e.lineage_sizes().items()}
    result = SeedResult(seed, snaps, curve_rows, aswr_trace, drift_log, counts, timing, label_rows)
    return result, meta


def _unit_str(unit) -> str:
    return "-".join(map(str, unit)) if isinstance(unit, tuple) else str(unit)


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run every seed; write the run artifacts when ``output_dir`` is set.

    On failure any files written by this call are removed again.
    """
    cfg.validate()
    if cfg.algorithm == BRPW and not cfg.force:
        n = cfg.synth.n_labels if cfg.synth is not None else None
        if n is not None and n > MAX_PAIRWISE_LABELS:
            raise ScalabilityError(
                f"BRPW on {n} labels needs {n * (n - 1)} pairwise models; use force to override"
            )
    out = Path(cfg.output_dir) if cfg.output_dir else None
    created = out is not None and not out.exists()
    written: list[Path] = []
    try:
        runs, meta = [], None
        for seed in cfg.seeds:
            res, meta = run_seed(cfg, seed)
            runs.append(res)
            if out is not None:
                written += write_seed(out, res, meta)
        result = RunResult(cfg, runs, meta)
        if out is not None:
            written += write_summary(out, result)
        return result
    except BaseException:
        if created:
            shutil.rmtree(out, ignore_errors=True)
        else:
            for p in written:
                p.unlink(missing_ok=True)
        raise


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_seed(out: Path, res: SeedResult, meta: DatasetMeta) -> list[Path]:
    d = out / f"seed_{res.seed}"
    files = []
    header = list(SNAPSHOT_FIELDS)
    if res.window_label_gmean is not None:
        header += [f"gmean_l{q + 1}" for q in range(meta.n_labels)]
        rows = ((i + 1, *r, *g) for i, (r, g) in enumerate(zip(res.snapshots, res.window_label_gmean)))
    else:
        rows = ((i + 1, *r) for i, r in enumerate(res.snapshots))
    files.append(_write_csv(d / "metrics.csv", header, rows))
    if res.label_curves is not None:
        header = ["step"] + [f"gmean_l{q + 1}" for q in range(meta.n_labels)]
        files.append(_write_csv(d / "label_curves.csv", header,
                                ((i + 1, *r) for i, r in enumerate(res.label_curves))))
    if res.aswr:
        header = ["step", "aswr"] + (["aswr_pw"] if len(res.aswr[0]) > 2 else [])
        files.append(_write_csv(d / "aswr.csv", header, res.aswr))
    files.append(_write_csv(d / "drifts.csv", ["event", "stream", "unit", "step"],
                            ((e, s, _unit_str(u), t) for e, s, u, t in res.drift_log)))
    timing = d / "timing.json"
    timing.write_text(json.dumps({"schema": SCHEMA_VERSION, "seconds": res.timing,
                                  "members": res.member_counts}, indent=2) + "\n", encoding="utf-8")
    files.append(timing)
    return files


def write_summary(out: Path, result: RunResult) -> list[Path]:
    header = ["seed"] + [f"mean_{m}" for m in METRICS] + [f"final_{m}" for m in METRICS] + ["runtime_s"]
    rows = []
    for r in result.runs:
        rows.append([r.seed, *r.mean().values(), *r.final().values(), sum(r.timing.values())])
    summ = result.summary()
    means = ["mean"] + [summ[m]["mean"] for m in METRICS]
    sds = ["stdev"] + [summ[m]["stdev"] for m in METRICS]
    blank = [""] * len(METRICS)
    rows.append(means + blank + [summ["runtime_s"]["mean"]])
    rows.append(sds + blank + [summ["runtime_s"]["stdev"]])
    files = [_write_csv(out / "summary.csv", header, rows)]
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(result.config.to_dict(), indent=2) + "\n", encoding="utf-8")
    files.append(cfg_path)
    return files


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("a config file holds one JSON object")
    return ExperimentConfig.from_dict(raw)


def fmt_summary(result: RunResult) -> str:
    s = result.summary()
    parts = [f"{m}={s[m]['mean']:.4f}±{s[m]['stdev']:.4f}" for m in METRICS]
    parts.append(f"runtime={s['runtime_s']['mean']:.2f}s")
    return " ".join(parts)


__all__ = [
    "ALGORITHMS",
    "ConfigError",
    "DummyMajority",
    "ExperimentConfig",
    "RunResult",
    "SeedResult",
    "fmt_summary",
    "load_config",
    "run_experiment",
    "run_seed",
]
