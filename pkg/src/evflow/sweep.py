"""Time-window grid search under a weighted ERR1/ERR2 objective."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .correlate import classify_relations, correlate
from .model import ClassifiedReport, TimeWindow, Variant

DEFAULT_GRID_MS = (0, 1000, 2000, 3000, 4000, 5000)

ROW_LABELS = (
    ("Single Flows", "single_flows"),
    ("Correlated Flows", "correlated_flows"),
    ("Single Events", "single_events"),
    ("Correlated Events", "correlated_events"),
    ("Polygamous Events", "polygamous_events"),
)


@dataclass(frozen=True)
class SweepConfig:
    earliness_values: Sequence[float] = DEFAULT_GRID_MS  # ms
    lateness_values: Sequence[float] = DEFAULT_GRID_MS  # ms
    weight_err1: float = 1.0
    weight_err2: float = 2.0
    include_unbounded: bool = False  # reference column, never chosen

    def __post_init__(self):
        for name in ("earliness_values", "lateness_values"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must not be empty")
            if len(set(values)) != len(values):
                raise ValueError(f"{name} contains duplicates")
            object.__setattr__(self, name, values)
        if self.weight_err1 < 0 or self.weight_err2 < 0:
            raise ValueError("weights must be non-negative")

    def windows(self) -> List[TimeWindow]:
        return [TimeWindow(e, l) for e in self.earliness_values for l in self.lateness_values]


def weighted_error(report: ClassifiedReport, weight_err1: float, weight_err2: float) -> float:
    return (weight_err1 * (report.single_events + report.single_flows)
            + weight_err2 * report.polygamous_events)


@dataclass(frozen=True)
class SweepRow:
    window: TimeWindow
    report: ClassifiedReport
    weighted_error: float


@dataclass(frozen=True)
class SweepReport:
    rows: tuple
    chosen: TimeWindow
    variant: Variant = Variant.ALL_PARAMS
    weights: tuple = (1.0, 2.0)
    unbounded: Optional[ClassifiedReport] = field(default=None, compare=False)

    def row_for(self, window: TimeWindow) -> SweepRow:
        for row in self.rows:
            if row.window == window:
                return row
        raise KeyError(window)

    def to_dict(self) -> dict:
        e, l = self.chosen.as_seconds()
        out = {
            "variant": self.variant.value,
            "weights": list(self.weights),
            "chosen": {"earliness_s": e, "lateness_s": l},
            "rows": [
                {
                    "earliness_s": r.window.as_seconds()[0],
                    "lateness_s": r.window.as_seconds()[1],
                    **r.report.counters(),
                    "weighted_error": r.weighted_error,
                }
                for r in self.rows
            ],
        }
        if self.unbounded is not None:
            out["unbounded"] = self.unbounded.counters()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        """Windows as columns, counters as rows -- the layout of a time-window table."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        columns = [str(r.window) for r in self.rows]
        if self.unbounded is not None:
            columns.append("(NA, NA)")
        w.writerow(["Time-Window Size"] + columns)
        for label, attr in ROW_LABELS:
            values = [getattr(r.report, attr) for r in self.rows]
            if self.unbounded is not None:
                values.append(getattr(self.unbounded, attr))
            w.writerow([label] + values)
        werr = [f"{r.weighted_error:g}" for r in self.rows]
        if self.unbounded is not None:
            werr.append("")
        w.writerow(["weighted_error"] + werr)
        return buf.getvalue()


def _tie_key(row: SweepRow):
    return (row.weighted_error, row.window.earliness + row.window.lateness, row.window.earliness)


def sweep_windows(events, flows, variant=Variant.ALL_PARAMS,
                  config: Optional[SweepConfig] = None) -> SweepReport:
    """Correlate at every grid window and pick the lowest weighted error.

    Ties go to the smallest earliness + lateness, then smallest earliness.
    """
    config = config or SweepConfig()
    variant = Variant.parse(variant)
    events, flows = list(events), list(flows)
    rows = []
    for window in config.windows():
        report = classify_relations(correlate(events, flows, variant, window), events, flows)
        rows.append(SweepRow(window, report,
                             weighted_error(report, config.weight_err1, config.weight_err2)))
    chosen = min(rows, key=_tie_key).window
    unbounded = None
    if config.include_unbounded:
        unbounded = classify_relations(correlate(events, flows, variant, None), events, flows)
    return SweepReport(tuple(rows), chosen, variant,
                       (config.weight_err1, config.weight_err2), unbounded)
