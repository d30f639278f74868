"""Experiment campaigns: delta sweeps, width sweeps, timing studies, persistence.

Every training run becomes a RunRecord that round-trips losslessly through one
CSV row (floats serialized with repr, so all 17 significant digits survive).
Failed (diverged) runs are kept as rows with NaN losses and are excluded from,
but counted next to, every summary statistic.
"""

from __future__ import annotations

import csv
import math
import os
import statistics
import uuid
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds
from .network import save_checkpoint
from .optimizer import TrainConfig, TrainingDivergedError, train
from .problems import NetworkSurrogate, make_problem
from .sampling import CollocationCounts, sample_collocation

RUNS_HEADER = ["run_id", "problem", "delta", "width", "depth", "seed", "iters",
               "lr", "n_int", "n_tb", "n_sb", "scheme", "loss_final", "loss_best",
               "train_seconds", "lhs_t1", "rhs_t1", "lhs_t2", "rhs_t2", "rhs_b1",
               "checkpoint"]
SUMMARY_HEADER = ["sweep_id", "width", "metric", "value"]


@dataclass
class RunRecord:
    run_id: str
    problem: str
    delta: float
    width: int
    depth: int
    seed: int
    iters: int
    lr: float
    n_int: int
    n_tb: int
    n_sb: int
    scheme: str
    loss_final: float
    loss_best: float
    train_seconds: float
    lhs_t1: float | None = None
    rhs_t1: float | None = None
    lhs_t2: float | None = None
    rhs_t2: float | None = None
    rhs_b1: float | None = None
    checkpoint: str = ""

    @property
    def failed(self) -> bool:
        return not math.isfinite(self.loss_final)

    def to_row(self) -> list[str]:
        row = []
        for name in RUNS_HEADER:
            v = getattr(self, name)
            if v is None:
                row.append("")
            elif isinstance(v, float):
                row.append(repr(v))
            else:
                row.append(str(v))
        return row

    @classmethod
    def from_row(cls, row: list[str]) -> "RunRecord":
        if len(row) != len(RUNS_HEADER):
            raise ValueError(f"expected {len(RUNS_HEADER)} columns, got {len(row)}")
        kw = dict(zip(RUNS_HEADER, row))
        for name in ("delta", "lr", "loss_final", "loss_best", "train_seconds"):
            kw[name] = float(kw[name])
        for name in ("width", "depth", "seed", "iters", "n_int", "n_tb", "n_sb"):
            kw[name] = int(kw[name])
        for name in ("lhs_t1", "rhs_t1", "lhs_t2", "rhs_t2", "rhs_b1"):
            kw[name] = float(kw[name]) if kw[name] != "" else None
        return cls(**kw)


def persist_records(records, path) -> None:
    """Append records to a runs CSV, writing the header for a fresh file."""
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(RUNS_HEADER)
        for rec in records:
            writer.writerow(rec.to_row())


def load_records(path) -> list[RunRecord]:
    """Load RunRecords from a runs CSV file or every *.csv in a directory."""
    if os.path.isdir(path):
        records = []
        for name in sorted(os.listdir(path)):
            if name.endswith(".csv"):
                full = os.path.join(path, name)
                with open(full, newline="") as fh:
                    first = fh.readline()
                if first.strip().split(",") == RUNS_HEADER:
                    records.extend(load_records(full))
        return records
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RUNS_HEADER:
            raise ValueError(f"{path}: unexpected runs.csv header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                records.append(RunRecord.from_row(row))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}: malformed row at line {lineno}: {exc}") from exc
    return records


def write_summary(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for r in rows:
            writer.writerow([r["sweep_id"], r["width"], r["metric"], repr(float(r["value"]))])


def load_summary(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected summary header {header}")
        for row in reader:
            rows.append({"sweep_id": row[0], "width": row[1] and int(row[1]) or row[1],
                         "metric": row[2], "value": float(row[3])})
    return rows


@dataclass(frozen=True)
class SweepSpec:
    """Configuration of one experiment campaign."""

    problem: str = "burgers1d"
    deltas: tuple = (0.1, 0.3, 0.5, 0.7, 0.9, 0.95)
    widths: tuple = (30,)
    depth: int = 6
    seeds: tuple = (0,)
    iterations: int = 20000
    lr: float = 1e-4
    n_int: int = 4096
    n_tb: int = 256
    n_sb: int = 256
    scheme: str = "random"
    grid_n: int | None = None
    sup_res: int | None = None
    margin: float = 1e-6
    out_dir: str = "."
    workers: int = 1
    compute_bounds: bool = True
    sweep_id: str = field(default_factory=lambda: uuid.uuid4().hex[:8])

    def validate(self) -> None:
        for d in self.deltas:
            make_problem(self.problem, d, self.margin)   # raises on inadmissible delta
        if not self.widths or not self.seeds:
            raise ValueError("sweep needs at least one width and one seed")


def run_single(spec: SweepSpec, delta: float, width: int, seed: int) -> RunRecord:
    """Sample collocation, train, evaluate the applicable bound(s), checkpoint."""
    problem = make_problem(spec.problem, delta, spec.margin)
    counts = CollocationCounts(spec.n_int, spec.n_tb, spec.n_sb)
    colloc = sample_collocation(problem, counts, spec.scheme, seed)
    config = TrainConfig(width=width, depth=spec.depth, iterations=spec.iterations,
                         lr=spec.lr, seed=seed)
    run_id = f"{spec.problem}-d{delta:g}-w{width}-s{seed}-{spec.sweep_id}"
    record = RunRecord(run_id=run_id, problem=spec.problem, delta=delta, width=width,
                       depth=spec.depth, seed=seed, iters=spec.iterations, lr=spec.lr,
                       n_int=colloc.n_int, n_tb=colloc.n_tb, n_sb=colloc.n_sb,
                       scheme=spec.scheme, loss_final=math.nan, loss_best=math.nan,
                       train_seconds=math.nan)
    try:
        result = train(problem, colloc, config)
    except TrainingDivergedError:
        return record
    record.loss_final = result.final_loss
    record.loss_best = result.best.loss
    record.train_seconds = result.train_seconds

    ckpt_dir = os.path.join(spec.out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    record.checkpoint = os.path.join(ckpt_dir, run_id + ".ckpt")
    save_checkpoint(record.checkpoint, result.best.params, seed, result.best.iteration)

    if spec.compute_bounds:
        surrogate = NetworkSurrogate(result.best.params)
        if problem.spatial_dim == 1:
            rep = bounds.theorem2_bound(problem, surrogate, spec.grid_n, spec.sup_res)
            record.lhs_t2, record.rhs_t2 = rep.lhs, rep.rhs
        else:
            rep = bounds.theorem1_bound(problem, surrogate, spec.grid_n, spec.sup_res)
            record.lhs_t1, record.rhs_t1 = rep.lhs, rep.rhs
    return record


def _run_cell(args):
    spec, delta, width, seed = args
    return run_single(spec, delta, width, seed)


def _execute(spec: SweepSpec, cells) -> list[RunRecord]:
    args = [(spec, d, w, s) for d, w, s in cells]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(_run_cell, args))
    return [_run_cell(a) for a in args]


def _ok(records):
    return [r for r in records if not r.failed]


def delta_sweep(spec: SweepSpec):
    """Train per (delta, width, seed) and correlate bound lhs vs rhs across delta.

    Returns (records, summary_rows, n_failed). For the 1D problem the series
    are the raw lhs/rhs of the boundary-tracking bound (as plotted in the
    source experiments); a log-scale Pearson is reported alongside. For the 2D
    problem the stored lhs/rhs are already logarithmic.
    """
    spec.validate()
    cells = [(d, w, s) for w in spec.widths for d in spec.deltas for s in spec.seeds]
    records = _execute(spec, cells)
    summary = []
    for w in spec.widths:
        per_width = [r for r in _ok(records) if r.width == w]
        if spec.problem == "burgers1d":
            pairs = [(r.lhs_t2, r.rhs_t2) for r in per_width
                     if r.lhs_t2 is not None and math.isfinite(r.lhs_t2)
                     and math.isfinite(r.rhs_t2)]
        else:
            pairs = [(r.lhs_t1, r.rhs_t1) for r in per_width
                     if r.lhs_t1 is not None and math.isfinite(r.lhs_t1)
                     and math.isfinite(r.rhs_t1)]
        if len(pairs) < 2:
            continue
        lhs, rhs = zip(*pairs)
        summary.append({"sweep_id": spec.sweep_id, "width": w,
                        "metric": "pearson_lhs_rhs",
                        "value": bounds.pearson(lhs, rhs)})
        if spec.problem == "burgers1d" and min(lhs) > 0 and min(rhs) > 0:
            summary.append({"sweep_id": spec.sweep_id, "width": w,
                            "metric": "pearson_log_lhs_rhs",
                            "value": bounds.pearson(np.log(lhs), np.log(rhs))})
    n_failed = len(records) - len(_ok(records))
    return records, summary, n_failed


def width_sweep(spec: SweepSpec):
    """Per-width statistics of the 1+1 bound rhs over seeds, plus a rank trend."""
    spec.validate()
    if spec.problem != "burgers1d":
        raise ValueError("the width sweep tracks the 1+1 bound; use problem=burgers1d")
    if len(spec.widths) < 2:
        raise ValueError("width sweep needs >= 2 widths")
    if len(spec.deltas) != 1:
        raise ValueError("width sweep runs at a single fixed delta")
    cells = [(spec.deltas[0], w, s) for w in spec.widths for s in spec.seeds]
    records = _execute(spec, cells)
    summary = []
    medians, med_widths = [], []
    for w in spec.widths:
        vals = [r.rhs_t2 for r in _ok(records)
                if r.width == w and r.rhs_t2 is not None and math.isfinite(r.rhs_t2)]
        if not vals:
            continue
        summary.append({"sweep_id": spec.sweep_id, "width": w,
                        "metric": "rhs_t2_mean", "value": statistics.fmean(vals)})
        summary.append({"sweep_id": spec.sweep_id, "width": w,
                        "metric": "rhs_t2_std",
                        "value": statistics.stdev(vals) if len(vals) > 1 else 0.0})
        summary.append({"sweep_id": spec.sweep_id, "width": w,
                        "metric": "rhs_t2_median", "value": statistics.median(vals)})
        medians.append(statistics.median(vals))
        med_widths.append(w)
    if len(medians) >= 2:
        summary.append({"sweep_id": spec.sweep_id, "width": "",
                        "metric": "spearman_rhs_width",
                        "value": bounds.spearman(medians, med_widths)})
    n_failed = len(records) - len(_ok(records))
    return records, summary, n_failed


def timing_study(spec: SweepSpec):
    """Training wall-time per delta; coefficient of variation across delta per width.

    Repeats of the same delta (one per seed) are interleaved across the
    campaign rather than run back to back, and each delta is summarized by its
    median wall-time over seeds, so that transient machine load perturbs the
    cross-delta comparison as little as possible.
    """
    spec.validate()
    spec = replace(spec, compute_bounds=False)
    cells = [(d, w, s) for s in spec.seeds for w in spec.widths for d in spec.deltas]
    records = _execute(spec, cells)
    summary = []
    for w in spec.widths:
        per_delta = []
        for d in spec.deltas:
            times = [r.train_seconds for r in _ok(records)
                     if r.width == w and r.delta == d]
            if times:
                per_delta.append(statistics.median(times))
        if not per_delta:
            continue
        mean = statistics.fmean(per_delta)
        std = statistics.stdev(per_delta) if len(per_delta) > 1 else 0.0
        summary.append({"sweep_id": spec.sweep_id, "width": w,
                        "metric": "timing_cv",
                        "value": std / mean if mean > 0 else 0.0})
    n_failed = len(records) - len(_ok(records))
    return records, summary, n_failed


def summarize_delta_records(records, sweep_id="resummary"):
    """Recompute the delta-sweep correlation summary from persisted records."""
    widths = sorted({r.width for r in records})
    summary = []
    for w in widths:
        per_width = [r for r in _ok(records) if r.width == w]
        for kind, lhs_name, rhs_name in (("t2", "lhs_t2", "rhs_t2"),
                                         ("t1", "lhs_t1", "rhs_t1")):
            pairs = [(getattr(r, lhs_name), getattr(r, rhs_name)) for r in per_width
                     if getattr(r, lhs_name) is not None
                     and math.isfinite(getattr(r, lhs_name))
                     and math.isfinite(getattr(r, rhs_name))]
            if len(pairs) < 2:
                continue
            lhs, rhs = zip(*pairs)
            summary.append({"sweep_id": sweep_id, "width": w,
                            "metric": "pearson_lhs_rhs",
                            "value": bounds.pearson(lhs, rhs)})
            if kind == "t2" and min(lhs) > 0 and min(rhs) > 0:
                summary.append({"sweep_id": sweep_id, "width": w,
                                "metric": "pearson_log_lhs_rhs",
                                "value": bounds.pearson(np.log(lhs), np.log(rhs))})
    return summary
