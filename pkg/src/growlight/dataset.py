"""Experiment-run persistence and training-sample construction.

A run file is a plain-text header of key=value lines (the Table-style
cultivation settings) followed by hourly CSV sensor records.  Per-plant
leaf areas live in one semicolon-joined field; the model consumes their
mean.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .growth import GrowthFeatures, GrowthSample

log = logging.getLogger(__name__)

_HEADER_KEYS = ("id", "avg_red_ppfd_on", "avg_blue_ppfd_on", "on_hours", "off_hours", "phase_hour")

_CSV_COLUMNS = (
    "timestamp",
    "red_ppfd",
    "blue_ppfd",
    "ec",
    "ph",
    "temp_c",
    "humidity_pct",
    "leaf_areas",
)


class ParseError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass(frozen=True)
class SensorRecord:
    timestamp: datetime
    red_ppfd: float
    blue_ppfd: float
    ec: float
    ph: float
    temp_c: float
    humidity_pct: float
    leaf_areas: tuple

    def __post_init__(self):
        if self.red_ppfd < 0 or self.blue_ppfd < 0:
            raise ValueError("PPFD must be non-negative")
        if any(a < 0 for a in self.leaf_areas):
            raise ValueError("leaf areas must be non-negative")

    @property
    def mean_leaf_area(self):
        return float(np.mean(self.leaf_areas))


@dataclass
class ExperimentRun:
    id: int
    avg_red_ppfd_on: float
    avg_blue_ppfd_on: float
    on_hours: int
    off_hours: int
    phase_hour: int = 0
    records: list = field(default_factory=list)

    def __post_init__(self):
        for prev, cur in zip(self.records, self.records[1:]):
            if cur.timestamp <= prev.timestamp:
                raise ParseError(
                    f"non-monotone timestamps in run {self.id}: {cur.timestamp}"
                )


def table1_presets():
    """The four cultivation-run configurations (headers only)."""
    return [
        ExperimentRun(id=1, avg_red_ppfd_on=166, avg_blue_ppfd_on=18, on_hours=18, off_hours=6),
        ExperimentRun(id=2, avg_red_ppfd_on=144, avg_blue_ppfd_on=54, on_hours=18, off_hours=6),
        ExperimentRun(id=3, avg_red_ppfd_on=160, avg_blue_ppfd_on=54, on_hours=9, off_hours=3),
        ExperimentRun(id=4, avg_red_ppfd_on=87, avg_blue_ppfd_on=37, on_hours=13, off_hours=11),
    ]


def _format_float(x):
    return repr(float(x))


def save_run(run, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"id={run.id}\n")
        fh.write(f"avg_red_ppfd_on={_format_float(run.avg_red_ppfd_on)}\n")
        fh.write(f"avg_blue_ppfd_on={_format_float(run.avg_blue_ppfd_on)}\n")
        fh.write(f"on_hours={run.on_hours}\n")
        fh.write(f"off_hours={run.off_hours}\n")
        fh.write(f"phase_hour={run.phase_hour}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for r in run.records:
            writer.writerow(
                [
                    r.timestamp.isoformat(),
                    _format_float(r.red_ppfd),
                    _format_float(r.blue_ppfd),
                    _format_float(r.ec),
                    _format_float(r.ph),
                    _format_float(r.temp_c),
                    _format_float(r.humidity_pct),
                    ";".join(_format_float(a) for a in r.leaf_areas),
                ]
            )


def load_run(path):
    header = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    lineno = 0
    for lineno, line in enumerate(lines, start=1):
        if "=" not in line:
            break
        key, _, value = line.partition("=")
        if key not in _HEADER_KEYS:
            raise ParseError(f"unknown header key {key!r}", line=lineno)
        header[key] = value
    else:
        lineno += 1  # header-only file with no CSV section
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise ParseError(f"missing header keys {missing}")

    records = []
    csv_lines = lines[lineno - 1 :]
    if csv_lines:
        if csv_lines[0] != ",".join(_CSV_COLUMNS):
            raise ParseError("bad CSV header", line=lineno)
        reader = csv.DictReader(io.StringIO("\n".join(csv_lines)))
        for offset, row in enumerate(reader):
            try:
                records.append(
                    SensorRecord(
                        timestamp=datetime.fromisoformat(row["timestamp"]),
                        red_ppfd=float(row["red_ppfd"]),
                        blue_ppfd=float(row["blue_ppfd"]),
                        ec=float(row["ec"]),
                        ph=float(row["ph"]),
                        temp_c=float(row["temp_c"]),
                        humidity_pct=float(row["humidity_pct"]),
                        leaf_areas=tuple(
                            float(a) for a in row["leaf_areas"].split(";") if a
                        ),
                    )
                )
            except (ValueError, TypeError, KeyError) as exc:
                raise ParseError(str(exc), line=lineno + 1 + offset) from exc

    return ExperimentRun(
        id=int(header["id"]),
        avg_red_ppfd_on=float(header["avg_red_ppfd_on"]),
        avg_blue_ppfd_on=float(header["avg_blue_ppfd_on"]),
        on_hours=int(header["on_hours"]),
        off_hours=int(header["off_hours"]),
        phase_hour=int(header["phase_hour"]),
        records=records,
    )


def save_runs(runs, directory):
    os.makedirs(directory, exist_ok=True)
    for run in runs:
        save_run(run, os.path.join(directory, f"run{run.id}.csv"))


def load_runs(directory):
    runs = []
    for name in sorted(os.listdir(directory)):
        if name.startswith("run") and name.endswith(".csv"):
            runs.append(load_run(os.path.join(directory, name)))
    return runs


def build_samples(run, delta_t_hours=24.0):
    """Sliding-window training samples from one run's records.

    Features are the window means; the leaf-area endpoints are the mean
    per-plant areas at the first and last record of the window.  Windows
    whose area does not increase are dropped (the log target needs a
    positive increment); the drop count is returned alongside.
    """
    records = run.records
    if len(records) < 2:
        raise ValueError("need at least 2 records")
    want = timedelta(hours=delta_t_hours)
    samples = []
    dropped = 0
    j = 0
    for i in range(len(records)):
        j = max(j, i + 1)
        while j < len(records) and records[j].timestamp - records[i].timestamp < want:
            j += 1
        if j >= len(records):
            break
        window = records[i : j + 1]
        l1 = records[i].mean_leaf_area
        l2 = records[j].mean_leaf_area
        if l2 <= l1:
            dropped += 1
            continue
        actual_dt = (records[j].timestamp - records[i].timestamp).total_seconds() / 3600.0
        age_days = (records[i].timestamp - records[0].timestamp).total_seconds() / 86400.0
        samples.append(
            GrowthSample(
                features=GrowthFeatures(
                    red_ppfd=float(np.mean([r.red_ppfd for r in window])),
                    blue_ppfd=float(np.mean([r.blue_ppfd for r in window])),
                    ec=float(np.mean([r.ec for r in window])),
                    ph=float(np.mean([r.ph for r in window])),
                    t_days=age_days,
                ),
                delta_t_hours=actual_dt,
                leaf_area_start=l1,
                leaf_area_end=l2,
            )
        )
    if dropped:
        log.info("run %d: dropped %d non-increasing windows", run.id, dropped)
    return samples, dropped


def split_train_test(runs, delta_t_hours=24.0):
    """Training samples from runs 1, 2 and 4; test samples from run 3."""
    by_id = {run.id: run for run in runs}
    missing = [i for i in (1, 2, 3, 4) if i not in by_id]
    if missing:
        raise ValueError(f"missing runs {missing}")
    train = []
    for i in (1, 2, 4):
        train.extend(build_samples(by_id[i], delta_t_hours)[0])
    test, _ = build_samples(by_id[3], delta_t_hours)
    if not test:
        log.warning("test run produced no samples")
    return train, test
