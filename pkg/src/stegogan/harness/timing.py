"""Run logs (per-batch wall time, per-batch metrics) and the timing report built from them."""
from __future__ import annotations

import csv
import math
import os
from collections import OrderedDict

from ..errors import DataError
from ..trainer import LossReport

TIMING_FIELDS = ("run_id", "epoch", "batch", "wall_time")
REPORT_FIELDS = ("run_id", "scope", "n_epochs", "n_batches", "wall_seconds", "wall_minutes", "mean_epoch_seconds")

# seven-epoch reference totals in minutes, rendered as comparison rows
REFERENCE_MINUTES = {"SSGAN": 227.5, "SGAN": 240.3}


def write_metrics(path, reports: list[LossReport]) -> None:
    """One row per batch; wall time is excluded so reruns compare byte-for-byte."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LossReport.METRIC_FIELDS)
        w.writeheader()
        for rep in reports:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rep.metrics().items()})


def append_timing_log(path, reports: list[LossReport], run_id: str) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TIMING_FIELDS)
        if new:
            w.writeheader()
        for rep in reports:
            w.writerow({"run_id": run_id, "epoch": rep.epoch, "batch": rep.batch, "wall_time": repr(rep.wall_time)})


def read_timing_rows(paths) -> list[dict]:
    rows = []
    for path in paths:
        try:
            with open(path, newline="") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None:
                    continue
                missing = {"epoch", "wall_time"} - set(reader.fieldnames)
                if missing:
                    raise DataError(f"{path}: run log lacks timing fields {sorted(missing)}")
                for row in reader:
                    row.setdefault("run_id", os.path.basename(path))
                    rows.append(row)
        except FileNotFoundError as exc:
            raise DataError(f"run log not found: {path}") from exc
    return rows


def _summary(run_id, scope, epochs, times):
    total = math.fsum(times)
    return {"run_id": run_id, "scope": scope, "n_epochs": len(epochs), "n_batches": len(times),
            "wall_seconds": total, "wall_minutes": total / 60,
            "mean_epoch_seconds": total / len(epochs) if epochs else 0.0}


def timing_report(logs, out_csv=None, reference: bool = False) -> list[dict]:
    """Per-run totals and per-epoch wall time from run logs.

    ``logs`` is a list of CSV paths or of already-parsed rows.  With
    ``reference`` the reference totals are appended as comparison rows.
    """
    rows = read_timing_rows(logs) if logs and not isinstance(logs[0], dict) else list(logs or [])
    runs: OrderedDict[str, OrderedDict[str, list[float]]] = OrderedDict()
    for row in rows:
        try:
            t = float(row["wall_time"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad wall_time in run log row {row}") from exc
        runs.setdefault(str(row.get("run_id", "")), OrderedDict()).setdefault(str(row["epoch"]), []).append(t)
    table = []
    for run_id, epochs in runs.items():
        for epoch, times in epochs.items():
            table.append(_summary(run_id, f"epoch {epoch}", [epoch], times))
        table.append(_summary(run_id, "total", list(epochs), [t for ts in epochs.values() for t in ts]))
    if reference:
        for name, minutes in REFERENCE_MINUTES.items():
            table.append({"run_id": f"reference:{name}", "scope": "total", "n_epochs": 7, "n_batches": "",
                          "wall_seconds": minutes * 60, "wall_minutes": minutes, "mean_epoch_seconds": minutes * 60 / 7})
    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
            w.writeheader()
            w.writerows(table)
    return table
