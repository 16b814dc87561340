"""Experiment reports: per-trial rows, aggregates and the CSV format.

CSV layout::

    # task: linreg
    # config: {...resolved config as JSON...}
    group,criterion,trial,aggregate,metric_name,metric,metric_std,wall_time,...
    ...

Trial rows have ``aggregate=false``; one aggregate row per
``(group, criterion)`` follows them with ``aggregate=true``, the trial
column empty, the mean of the metric and its standard deviation. Columns
whose name starts with ``wall_time`` hold timings and are the only
nondeterministic values in a report.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .config import config_json

CORE_COLUMNS = ["group", "criterion", "trial", "aggregate", "metric_name", "metric",
                "metric_std", "wall_time", "wall_time_std", "iterations", "converged", "status"]

_INT = re.compile(r"^-?\d+$")


class ReportError(ValueError):
    pass


@dataclass
class ExperimentReport:
    task: str
    config: dict
    rows: list = field(default_factory=list)

    @property
    def trial_rows(self) -> list:
        return [r for r in self.rows if not r["aggregate"]]

    @property
    def aggregate_rows(self) -> list:
        return [r for r in self.rows if r["aggregate"]]

    @property
    def columns(self) -> list:
        extra = []
        for r in self.rows:
            for k in r:
                if k not in CORE_COLUMNS and k not in extra:
                    extra.append(k)
        return CORE_COLUMNS + extra

    def aggregate(self, group, criterion) -> dict:
        for r in self.aggregate_rows:
            if r["group"] == group and r["criterion"] == criterion:
                return r
        raise KeyError((group, criterion))

    def trials(self, group, criterion) -> list:
        return [r for r in self.trial_rows if r["group"] == group and r["criterion"] == criterion]


def trial_row(group, criterion: str, trial: int, metric_name: str, metric: float,
              wall_time: float, iterations=None, converged=None, status: str = "ok",
              **extra) -> dict:
    row = {
        "group": group, "criterion": criterion, "trial": int(trial), "aggregate": False,
        "metric_name": metric_name, "metric": float(metric), "metric_std": None,
        "wall_time": float(wall_time), "wall_time_std": None,
        "iterations": None if iterations is None else int(iterations),
        "converged": converged, "status": status,
    }
    row.update(extra)
    return row


def _std(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def add_aggregates(report: ExperimentReport, time_stat: str = "mean") -> ExperimentReport:
    """Append one aggregate row per (group, criterion), in first-seen order.

    Failed trials (``status != "ok"``) are left out of the statistics and
    counted in the ``failed`` column.
    """
    trials = report.trial_rows
    if not trials:
        raise ReportError("cannot aggregate a report with no trial rows")
    keys = []
    for r in trials:
        k = (r["group"], r["criterion"])
        if k not in keys:
            keys.append(k)
    out = list(trials)
    for group, crit in keys:
        rows = [r for r in trials if r["group"] == group and r["criterion"] == crit]
        ok = [r for r in rows if r["status"] == "ok"]
        metric = np.array([r["metric"] for r in ok], dtype=np.float64)
        times = np.array([r["wall_time"] for r in ok], dtype=np.float64)
        its = [r["iterations"] for r in ok if r["iterations"] is not None]
        conv = [r["converged"] for r in ok if r["converged"] is not None]
        stat = np.median if time_stat == "median" else np.mean
        out.append({
            "group": group, "criterion": crit, "trial": None, "aggregate": True,
            "metric_name": rows[0]["metric_name"],
            "metric": float(np.mean(metric)) if ok else math.nan,
            "metric_std": _std(metric) if ok else math.nan,
            "wall_time": float(stat(times)) if ok else math.nan,
            "wall_time_std": _std(times) if ok else math.nan,
            "iterations": float(np.mean(its)) if its else None,
            "converged": all(conv) if conv else None,
            "status": "ok" if len(ok) == len(rows) else f"{len(rows) - len(ok)} failed",
            "failed": len(rows) - len(ok),
        })
    report.rows = out
    return report


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    if _INT.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


def to_csv(report: ExperimentReport) -> str:
    if not report.rows:
        raise ReportError("report has no rows")
    buf = io.StringIO()
    buf.write(f"# task: {report.task}\n")
    buf.write(f"# config: {config_json(report.config)}\n")
    cols = report.columns
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in report.rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def from_csv(text: str) -> ExperimentReport:
    lines = text.splitlines()
    task, config = None, None
    body = []
    for line in lines:
        if line.startswith("# task: "):
            task = line[len("# task: "):]
        elif line.startswith("# config: "):
            config = json.loads(line[len("# config: "):])
        elif not line.startswith("#"):
            body.append(line)
    if task is None or config is None:
        raise ReportError("missing '# task:' or '# config:' header line")
    reader = csv.reader(body)
    cols = next(reader)
    rows = []
    for cells in reader:
        if len(cells) != len(cols):
            raise ReportError(f"row has {len(cells)} cells, header has {len(cols)}")
        row = {c: _parse(v) for c, v in zip(cols, cells)}
        # extra columns absent from a row are written empty; drop them again
        rows.append({c: v for c, v in row.items() if c in CORE_COLUMNS or v is not None})
    return ExperimentReport(task, config, rows)


def write_csv(report: ExperimentReport, path: str) -> str:
    text = to_csv(report)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportError(f"cannot write report to {path}: {exc.strerror}") from None
    return path


def read_csv(path: str) -> ExperimentReport:
    with open(path, encoding="utf-8") as fh:
        return from_csv(fh.read())


def strip_wall_time(text: str) -> str:
    """CSV text with every ``wall_time*`` column blanked, for determinism checks."""
    out = []
    header = None
    for line in text.splitlines():
        if line.startswith("#"):
            out.append(line)
            continue
        cells = next(csv.reader([line]))
        if header is None:
            header = cells
            keep = [not c.startswith("wall_time") for c in header]
            out.append(line)
            continue
        out.append(",".join(c if k else "" for c, k in zip(cells, keep)))
    return "\n".join(out)


def rows_equal(a: dict, b: dict) -> bool:
    if a.keys() != b.keys():
        return False
    for k in a:
        x, y = a[k], b[k]
        if isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y):
            continue
        if x != y:
            return False
    return True


def ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {path}: {exc.strerror}") from None
    if not os.access(path, os.W_OK):
        raise ReportError(f"output directory {path} is not writable")
    return path
