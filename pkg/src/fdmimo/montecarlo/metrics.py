"""Aggregated Monte Carlo results and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

__all__ = ["MetricRow", "MetricsTable", "CSV_VERSION_LINE", "CSV_COLUMNS", "mean_stderr"]

CSV_VERSION_LINE = "# fdmimo-csv v1"
CSV_COLUMNS = ("scenario", "method", "param", "metric", "mean", "stderr", "trials")
SKIPPED = "skipped"


def mean_stderr(samples) -> tuple:
    """Sample mean and ``std / sqrt(n)`` (ddof=1; zero for a single sample)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    se = float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return float(np.mean(x)), se


@dataclass(frozen=True)
class MetricRow:
    scenario: str
    method: str
    param: str
    metric: str
    mean: float
    stderr: float
    trials: int

    @property
    def skipped(self) -> bool:
        return self.metric.startswith(SKIPPED)

    def ci95(self) -> tuple:
        return self.mean - 1.96 * self.stderr, self.mean + 1.96 * self.stderr


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return format(float(x), ".17g")


class MetricsTable:
    """Ordered collection of ``MetricRow`` records."""

    def __init__(self, rows: Optional[Iterable[MetricRow]] = None):
        self.rows: List[MetricRow] = list(rows or [])

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def add(self, scenario, method, param, metric, samples) -> MetricRow:
        x = np.asarray(samples, dtype=float).ravel()
        mean, se = mean_stderr(x)
        row = MetricRow(str(scenario), str(method), str(param), str(metric), mean, se, int(x.size))
        self.rows.append(row)
        return row

    def add_value(self, scenario, method, param, metric, value, stderr=0.0, trials=0) -> MetricRow:
        row = MetricRow(str(scenario), str(method), str(param), str(metric),
                        float(value), float(stderr), int(trials))
        self.rows.append(row)
        return row

    def add_skipped(self, scenario, method, param, reason: str) -> MetricRow:
        reason = " ".join(str(reason).split()).replace(",", ";")
        row = MetricRow(str(scenario), str(method), str(param), f"{SKIPPED}: {reason}",
                        float("nan"), float("nan"), 0)
        self.rows.append(row)
        return row

    def extend(self, other: "MetricsTable"):
        self.rows.extend(other.rows)

    def find(self, scenario=None, method=None, param=None, metric=None) -> List[MetricRow]:
        out = []
        for r in self.rows:
            if ((scenario is None or r.scenario == scenario) and (method is None or r.method == method)
                    and (param is None or r.param == param) and (metric is None or r.metric == metric)):
                out.append(r)
        return out

    def get(self, scenario=None, method=None, param=None, metric=None) -> MetricRow:
        rows = self.find(scenario, method, param, metric)
        if len(rows) != 1:
            raise KeyError(f"expected one row, found {len(rows)}")
        return rows[0]

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_VERSION_LINE + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([r.scenario, r.method, r.param, r.metric,
                             _fmt(r.mean), _fmt(r.stderr), r.trials])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_string(), encoding="utf-8")

    @classmethod
    def read_csv(cls, path) -> "MetricsTable":
        text = Path(path).read_text(encoding="utf-8")
        lines = text.splitlines()
        if not lines or lines[0].strip() != CSV_VERSION_LINE:
            raise ValueError(f"{path}: missing '{CSV_VERSION_LINE}' header")
        reader = csv.DictReader(lines[1:])
        rows = []
        for rec in reader:
            rows.append(MetricRow(
                rec["scenario"], rec["method"], rec["param"], rec["metric"],
                float(rec["mean"]) if rec["mean"] else float("nan"),
                float(rec["stderr"]) if rec["stderr"] else float("nan"),
                int(rec["trials"])))
        return cls(rows)
