"""Correlation of web-server log events with encrypted HTTPS flow records."""

from .correlate import brute_force_correlate, classify_relations, correlate
from .evaluate import candidate_universe, establish_ground_truth, evaluate_variant
from .model import (
    ClassifiedReport, EventRecord, FlowRecord, MetricsReport, NormalizedEvent,
    NormalizedFlow, RelationSet, TimeWindow, Variant, required_features,
)
from .normalize import filter_dataset, normalize_event, normalize_flow
from .sweep import SweepConfig, SweepReport, sweep_windows

__version__ = "0.1.0"

__all__ = [
    "ClassifiedReport", "EventRecord", "FlowRecord", "MetricsReport", "NormalizedEvent",
    "NormalizedFlow", "RelationSet", "SweepConfig", "SweepReport", "TimeWindow", "Variant",
    "brute_force_correlate", "candidate_universe", "classify_relations", "correlate",
    "establish_ground_truth", "evaluate_variant", "filter_dataset", "normalize_event",
    "normalize_flow", "required_features", "sweep_windows",
]
