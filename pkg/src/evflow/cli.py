"""Command-line entry point: ``evflow <subcommand> ...``.

Exit status: 0 success, 1 input/usage error, 2 internal inconsistency.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import List, Optional

from . import ingest
from .correlate import classify_relations, correlate
from .evaluate import candidate_universe, establish_ground_truth, evaluate_variant
from .flowassembly import AssemblyConfig, assemble_flows, read_packets
from .model import InconsistentInputError, RelationSet, TimeWindow, Variant
from .normalize import filter_dataset, flow_to_record, normalize_event, normalize_flow
from .sweep import SweepConfig, sweep_windows
from .synth import SynthConfig, generate, write_dataset


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- helpers

def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _seconds(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number of seconds: {text!r}") from None
    if not (v >= 0 and v != float("inf")):
        raise argparse.ArgumentTypeError(f"seconds must be finite and >= 0: {text!r}")
    return v


def _variant(text: str) -> Variant:
    names = [v.value for v in Variant]
    if text not in names:
        raise argparse.ArgumentTypeError(f"unknown feature set {text!r} (choose from {', '.join(names)})")
    return Variant(text)


def _axis(text: str) -> List[float]:
    """``0..5`` (whole seconds inclusive) or ``0,0.5,1``; values in seconds."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo_i, hi_i = int(lo), int(hi)
            if lo_i > hi_i:
                raise ValueError
            values = [float(v) for v in range(lo_i, hi_i + 1)]
        else:
            values = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"malformed grid axis {text!r}") from None
    if any(v < 0 for v in values) or len(set(values)) != len(values):
        raise UsageError(f"grid axis {text!r} must hold distinct non-negative values")
    return values


def parse_grid(text: str):
    parts = text.lower().split("x")
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise UsageError(f"malformed grid {text!r}; expected AxB, e.g. 0..5x0..5")
    return _axis(parts[0]), _axis(parts[1])


def parse_weights(text: str):
    try:
        w1, w2 = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"malformed weights {text!r}; expected W1,W2") from None
    return w1, w2


def _window(args) -> Optional[TimeWindow]:
    if getattr(args, "window", None) == "unbounded":
        return None
    return TimeWindow.seconds(args.earliness, args.lateness)


def _require(path: Optional[str], flag: str) -> str:
    if not path:
        raise UsageError(f"{flag} is required")
    if not os.path.isfile(path):
        raise UsageError(f"no such file: {path}")
    return path


def _load(args, variant: Variant):
    events, e_err = ingest.load_events(_require(args.events, "--events"))
    flows, f_err = ingest.load_flows(_require(args.flows, "--flows"))
    events = [normalize_event(e) for e in events]
    flows = [normalize_flow(f) for f in flows]
    kept_e, kept_f, rejected = filter_dataset(events, flows, variant)
    return kept_e, kept_f, rejected, e_err, f_err


def _read_relations(path: str) -> RelationSet:
    pairs = []
    with open(_require(path, "relations file"), encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pairs.append((obj["event_id"], obj["flow_id"]))
            except (ValueError, KeyError, TypeError):
                raise UsageError(f"{path}:{n}: expected {{\"event_id\", \"flow_id\"}} object") from None
    return RelationSet.of(pairs)


def _write_relations(path: str, relations: RelationSet, fmt: str = "json") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["event_id", "flow_id"])
            w.writerows(relations)
        else:
            for e, f in relations:
                fh.write(json.dumps({"event_id": e, "flow_id": f}, sort_keys=True) + "\n")


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


# ---------------------------------------------------------------- commands

def cmd_normalize(args) -> int:
    events, flows, rejected, e_err, f_err = _load(args, args.features)
    out = _out_dir(args)
    with open(os.path.join(out, "events.log"), "w", encoding="utf-8") as fh:
        ingest.write_event_log(events, fh)
    with open(os.path.join(out, "flows.csv"), "w", encoding="utf-8", newline="") as fh:
        ingest.write_flow_records([flow_to_record(f) for f in flows], fh)
    _write_json(os.path.join(out, "rejections.json"), {
        "features": args.features.value,
        "kept_events": len(events),
        "kept_flows": len(flows),
        "rejected": [{"kind": r.kind, "id": r.source_id, "missing": r.missing} for r in rejected],
        "parse_errors": {
            "events": [{"line": e.line_number, "reason": e.reason} for e in e_err],
            "flows": [{"line": e.line_number, "reason": e.reason} for e in f_err],
        },
    })
    return 0


def cmd_correlate(args) -> int:
    events, flows, rejected, e_err, f_err = _load(args, args.features)
    window = _window(args)
    relations = correlate(events, flows, args.features, window)
    report = classify_relations(relations, events, flows)
    out = _out_dir(args)
    ext = "csv" if args.format == "csv" else "jsonl"
    _write_relations(os.path.join(out, f"relations.{ext}"), relations, args.format)
    summary = dict(report.counters())
    summary.update({
        "features": args.features.value,
        "window": "unbounded" if window is None else dict(zip(("earliness_s", "lateness_s"), window.as_seconds())),
        "pairs": len(relations),
        "rejected": len(rejected),
        "parse_errors": len(e_err) + len(f_err),
    })
    _write_json(os.path.join(out, "summary.json"), summary)
    return 0


def cmd_sweep(args) -> int:
    events, flows, *_ = _load(args, args.features)
    e_axis, l_axis = parse_grid(args.grid)
    w1, w2 = parse_weights(args.weights)
    config = SweepConfig(
        earliness_values=[TimeWindow.seconds(v, 0).earliness for v in e_axis],
        lateness_values=[TimeWindow.seconds(0, v).lateness for v in l_axis],
        weight_err1=w1, weight_err2=w2,
        include_unbounded=args.window == "unbounded",
    )
    report = sweep_windows(events, flows, args.features, config)
    out = _out_dir(args)
    if args.format == "csv":
        with open(os.path.join(out, "sweep.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    else:
        with open(os.path.join(out, "sweep.json"), "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    print(f"chosen window {report.chosen}")
    return 0


def cmd_evaluate(args) -> int:
    if args.ground_truth or args.predicted:
        gt = _read_relations(args.ground_truth)
        pred = _read_relations(args.predicted)
        if args.universe is not None:
            universe, source = args.universe, "given"
        elif args.events and args.flows:
            events, flows, *_ = _load(args, Variant.ALL_PARAMS)
            universe = candidate_universe(events, flows, TimeWindow.seconds(args.max_earliness, args.max_lateness))
            source = "candidate"
        else:
            # no data to bound it: accuracy is then tp / |gt ∪ pred|
            universe, source = len(gt.pairs | pred.pairs), "union"
    else:
        events, flows, *_ = _load(args, Variant.ALL_PARAMS)
        window = TimeWindow.seconds(args.earliness, args.lateness)
        gt = establish_ground_truth(events, flows, window)
        pred = correlate(events, flows, args.features, window)
        universe = candidate_universe(events, flows, TimeWindow.seconds(args.max_earliness, args.max_lateness))
        source = "candidate"
        if args.universe is not None:
            universe, source = args.universe, "given"
    metrics = evaluate_variant(gt, pred, universe)
    out = _out_dir(args)
    result = metrics.to_dict()
    result["universe"] = universe
    result["universe_source"] = source
    if not (args.ground_truth or args.predicted):
        result["features"] = args.features.value
    _write_json(os.path.join(out, "metrics.json"), result)
    return 0


def cmd_synth(args) -> int:
    data = {}
    if args.config:
        try:
            with open(_require(args.config, "--config"), encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"config {args.config} must be a JSON object")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.sessions is not None:
        data["session_count"] = args.sessions
    events, flows, labels = generate(SynthConfig.from_dict(data))
    write_dataset(_out_dir(args), events, flows, labels, "jsonl" if args.format == "jsonl" else "csv")
    return 0


def cmd_assemble(args) -> int:
    path = _require(args.packets, "--packets")
    with open(path, encoding="utf-8", newline="") as fh:
        packets = read_packets(fh, ingest.flow_format_for(path))
    config = AssemblyConfig(
        active_timeout_ms=int(round(args.active_timeout * 1000)),
        inactive_timeout_ms=int(round(args.inactive_timeout * 1000)),
        syn_split=not args.no_syn_split,
    )
    flows = assemble_flows(packets, config)
    fmt = "jsonl" if args.format == "jsonl" else "csv"
    out = _out_dir(args)
    with open(os.path.join(out, f"flows.{fmt}"), "w", encoding="utf-8", newline="") as fh:
        ingest.write_flow_records(flows, fh, fmt)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evflow", description="Correlate web-server log events with HTTPS flow records.")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp, features=True):
        sp.add_argument("--events", metavar="FILE", help="W3C extended log file")
        sp.add_argument("--flows", metavar="FILE", help="flow records (.csv or .jsonl)")
        if features:
            sp.add_argument("--features", type=_variant, default=Variant.ALL_PARAMS,
                            metavar="NAME", help="all-params | no-sni | no-port | no-port-sni")
        sp.add_argument("--out", metavar="DIR", default=".")

    def window_args(sp, default_e=0.0):
        sp.add_argument("--earliness", type=_seconds, default=default_e, metavar="SEC")
        sp.add_argument("--lateness", type=_seconds, default=0.0, metavar="SEC")

    sp = sub.add_parser("normalize", help="parse, normalize and filter inputs")
    data_args(sp)
    sp.set_defaults(func=cmd_normalize)

    sp = sub.add_parser("correlate", help="emit event-flow relations and a cardinality summary")
    data_args(sp)
    window_args(sp)
    sp.add_argument("--window", choices=["unbounded"], help="ignore time entirely")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(func=cmd_correlate)

    sp = sub.add_parser("sweep", help="grid-search correlation time-windows")
    data_args(sp)
    sp.add_argument("--grid", default="0..5x0..5", metavar="AxB")
    sp.add_argument("--weights", default="1,2", metavar="W1,W2")
    sp.add_argument("--window", choices=["unbounded"], help="add the unbounded reference column")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("evaluate", help="score a variant against all-params ground truth")
    data_args(sp)
    window_args(sp, default_e=3.0)
    sp.add_argument("--ground-truth", metavar="FILE", help="relations JSONL")
    sp.add_argument("--predicted", metavar="FILE", help="relations JSONL")
    sp.add_argument("--universe", type=int, metavar="N", help="override the true-negative universe size")
    sp.add_argument("--max-earliness", type=_seconds, default=5.0, metavar="SEC")
    sp.add_argument("--max-lateness", type=_seconds, default=5.0, metavar="SEC")
    sp.add_argument("--format", choices=["json"], default="json")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("synth", help="generate a labelled synthetic dataset")
    sp.add_argument("--config", metavar="FILE", help="JSON object of generator settings")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--sessions", type=int)
    sp.add_argument("--format", choices=["csv", "jsonl"], default="csv", help="flow file format")
    sp.add_argument("--out", metavar="DIR", default=".")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("assemble", help="build flow records from packet summaries")
    sp.add_argument("--packets", metavar="FILE", help="packet summaries (.csv or .jsonl)")
    sp.add_argument("--active-timeout", type=_seconds, default=300.0, metavar="SEC")
    sp.add_argument("--inactive-timeout", type=_seconds, default=30.0, metavar="SEC")
    sp.add_argument("--no-syn-split", action="store_true")
    sp.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    sp.add_argument("--out", metavar="DIR", default=".")
    sp.set_defaults(func=cmd_assemble)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except InconsistentInputError as exc:
        print(f"evflow: inconsistent input: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"evflow: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
