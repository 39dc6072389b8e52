"""Parsers and serializers for event logs and flow record files.

Event logs use the W3C Extended Log Format as written by IIS: ``#``
directives, space separated values, ``-`` for an absent value and a
``#Fields:`` directive that governs every following data line.  Flow files
are CSV or JSON-lines keyed by IPFIX-style element names.

Parsing never aborts on a bad line; each data line yields either a record or
a :class:`ParseError`.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Iterable, List, Optional, Tuple

from .model import EventRecord, FlowRecord

MISSING_FIELD = "missing-field"
BAD_TIMESTAMP = "bad-timestamp"
BAD_IP = "bad-ip"
BAD_PORT = "bad-port"
BAD_DIRECTIVE = "bad-directive"

# W3C field -> EventRecord attribute
EVENT_FIELDS = {
    "s-ip": "s_ip",
    "s-port": "s_port",
    "c-ip": "c_ip",
    "c-port": "c_port",
    "cs-host": "cs_host",
    "sc-bytes": "sc_bytes",
    "cs-bytes": "cs_bytes",
    "cs-uri-stem": "cs_uri_stem",
    "cs(User-Agent)": "cs_user_agent",
}
# Application-specific field carrying the record id so files round-trip.
EVENT_ID_FIELD = "x-source-id"
REQUIRED_EVENT_FIELDS = ("date", "time", "s-ip", "s-port", "c-ip")

FLOW_COLUMNS = (
    "START_NSEC", "END_NSEC", "L3_IPV4_SRC", "L3_IPV4_DST", "L4_PORT_SRC",
    "L4_PORT_DST", "BYTES_A", "BYTES_B", "HTTP_REQUEST_HOST",
)
FLOW_ID_COLUMN = "FLOW_ID"
REQUIRED_FLOW_COLUMNS = FLOW_COLUMNS[:6]


@dataclass(frozen=True)
class ParseError:
    line_number: int
    reason: str
    raw_line: str


class _LineError(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def is_ipv4(text: str) -> bool:
    """Dotted-quad check that tolerates leading zeros (canonicalized later)."""
    parts = text.split(".")
    if len(parts) != 4:
        return False
    for p in parts:
        if not p.isdigit() or not p.isascii() or len(p) > 3 or int(p) > 255:
            return False
    return True


def _ip(value: Optional[str]) -> str:
    if value is None:
        raise _LineError(MISSING_FIELD)
    if not is_ipv4(value):
        raise _LineError(BAD_IP)
    return value


def _port(value, optional: bool = False) -> Optional[int]:
    if value is None or value == "":
        if optional:
            return None
        raise _LineError(MISSING_FIELD)
    try:
        port = int(value)
    except (TypeError, ValueError):
        raise _LineError(BAD_PORT) from None
    if isinstance(value, float) and value != port:
        raise _LineError(BAD_PORT)
    if optional and port == 0:
        # some exporters log 0 for "unknown client port"
        return None
    if not 1 <= port <= 65535:
        raise _LineError(BAD_PORT)
    return port


def _count(value) -> Optional[int]:
    if value is None or value == "":
        return None
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise _LineError(MISSING_FIELD) from None
    if n < 0:
        raise _LineError(MISSING_FIELD)
    return n


# ---------------------------------------------------------------- events

def _parse_w3c_time(date: Optional[str], time: Optional[str]) -> int:
    if date is None or time is None:
        raise _LineError(MISSING_FIELD)
    fmt = "%Y-%m-%d %H:%M:%S.%f" if "." in time else "%Y-%m-%d %H:%M:%S"
    try:
        dt = datetime.strptime(f"{date} {time}", fmt)
    except ValueError:
        raise _LineError(BAD_TIMESTAMP) from None
    if "." in time and len(time.split(".", 1)[1]) > 3:
        raise _LineError(BAD_TIMESTAMP)  # events carry at most ms precision
    ms = int(dt.replace(tzinfo=timezone.utc).timestamp()) * 1000 + dt.microsecond // 1000
    if ms < 0:
        raise _LineError(BAD_TIMESTAMP)
    return ms


def _format_w3c_time(ms: int) -> Tuple[str, str]:
    dt = datetime.fromtimestamp(ms // 1000, tz=timezone.utc)
    date, clock = dt.strftime("%Y-%m-%d"), dt.strftime("%H:%M:%S")
    if ms % 1000:
        clock += f".{ms % 1000:03d}"
    return date, clock


def _event_from_values(fields: List[str], values: List[str], line_number: int) -> EventRecord:
    if len(values) != len(fields):
        raise _LineError(MISSING_FIELD)
    row = {}
    for name, value in zip(fields, values):
        row[name] = None if value == "-" else value
    for name in REQUIRED_EVENT_FIELDS:
        if row.get(name) is None:
            raise _LineError(MISSING_FIELD)
    ts = _parse_w3c_time(row["date"], row["time"])
    extra = {k: v for k, v in row.items()
             if k not in EVENT_FIELDS and k not in ("date", "time", EVENT_ID_FIELD)
             and v is not None}
    try:
        return EventRecord(
            time_generated=ts,
            s_ip=_ip(row["s-ip"]),
            s_port=_port(row["s-port"]),
            c_ip=_ip(row["c-ip"]),
            c_port=_port(row.get("c-port"), optional=True),
            cs_host=row.get("cs-host"),
            sc_bytes=_count(row.get("sc-bytes")),
            cs_bytes=_count(row.get("cs-bytes")),
            cs_uri_stem=row.get("cs-uri-stem"),
            cs_user_agent=row.get("cs(User-Agent)"),
            source_id=row.get(EVENT_ID_FIELD) or f"line-{line_number}",
            extra=extra,
        )
    except ValueError:
        raise _LineError(MISSING_FIELD) from None


def parse_event_log(stream: IO[str]) -> Tuple[List[EventRecord], List[ParseError]]:
    """Parse a W3C extended log stream into events and per-line errors."""
    events: List[EventRecord] = []
    errors: List[ParseError] = []
    fields: Optional[List[str]] = None
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            if line.startswith("#Fields:"):
                fields = line[len("#Fields:"):].split() or None
            continue
        if fields is None:
            errors.append(ParseError(lineno, BAD_DIRECTIVE, line))
            continue
        try:
            events.append(_event_from_values(fields, line.split(" "), lineno))
        except _LineError as exc:
            errors.append(ParseError(lineno, exc.reason, line))
    return events, errors


def _event_field_list(e: EventRecord) -> List[str]:
    names = ["date", "time", "s-ip", "s-port", "c-ip", "c-port", "cs-host",
             "sc-bytes", "cs-bytes", "cs-uri-stem", "cs(User-Agent)"]
    return names + sorted(e.extra) + [EVENT_ID_FIELD]


def _w3c_value(v) -> str:
    if v is None or v == "":
        return "-"
    return str(v)


def write_event_log(events: Iterable[EventRecord], stream: IO[str]) -> None:
    """Write events as W3C extended log lines.

    A new ``#Fields:`` directive is emitted whenever the field list changes
    (records with differing auxiliary fields).
    """
    stream.write("#Software: evflow\n#Version: 1.0\n")
    current = None
    for e in events:
        fields = _event_field_list(e)
        if fields != current:
            stream.write("#Fields: " + " ".join(fields) + "\n")
            current = fields
        date, clock = _format_w3c_time(e.time_generated)
        values = [date, clock]
        for name in fields[2:]:
            if name in EVENT_FIELDS:
                values.append(_w3c_value(getattr(e, EVENT_FIELDS[name])))
            elif name == EVENT_ID_FIELD:
                values.append(_w3c_value(e.source_id))
            else:
                values.append(_w3c_value(e.extra.get(name)))
        stream.write(" ".join(values) + "\n")


# ---------------------------------------------------------------- flows

def _flow_from_row(row: dict, line_number: int) -> FlowRecord:
    for col in REQUIRED_FLOW_COLUMNS:
        v = row.get(col)
        if v is None or v == "":
            raise _LineError(MISSING_FIELD)
    try:
        start, end = int(row["START_NSEC"]), int(row["END_NSEC"])
    except (TypeError, ValueError):
        raise _LineError(BAD_TIMESTAMP) from None
    if start < 0 or start > end:
        raise _LineError(BAD_TIMESTAMP)
    host = row.get("HTTP_REQUEST_HOST")
    flow_id = row.get(FLOW_ID_COLUMN)
    return FlowRecord(
        start_ns=start,
        end_ns=end,
        l3_ipv4_src=_ip(str(row["L3_IPV4_SRC"])),
        l3_ipv4_dst=_ip(str(row["L3_IPV4_DST"])),
        l4_port_src=_port(row["L4_PORT_SRC"]),
        l4_port_dst=_port(row["L4_PORT_DST"]),
        bytes_a=_count(row.get("BYTES_A")) or 0,
        bytes_b=_count(row.get("BYTES_B")) or 0,
        http_request_host=str(host) if host not in (None, "") else None,
        source_id=str(flow_id) if flow_id not in (None, "") else f"row-{line_number}",
    )


def _parse_flow_csv(stream: IO[str]):
    flows, errors = [], []
    reader = csv.reader(stream)
    header = None
    for raw in reader:
        lineno = reader.line_num
        if not raw or all(not c.strip() for c in raw):
            continue
        if header is None:
            header = [c.strip() for c in raw]
            continue
        line = ",".join(raw)
        if len(raw) != len(header):
            errors.append(ParseError(lineno, MISSING_FIELD, line))
            continue
        try:
            flows.append(_flow_from_row(dict(zip(header, raw)), lineno))
        except _LineError as exc:
            errors.append(ParseError(lineno, exc.reason, line))
    return flows, errors


def _parse_flow_jsonl(stream: IO[str]):
    flows, errors = [], []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            if not isinstance(row, dict):
                raise _LineError(MISSING_FIELD)
            flows.append(_flow_from_row(row, lineno))
        except json.JSONDecodeError:
            errors.append(ParseError(lineno, MISSING_FIELD, line))
        except _LineError as exc:
            errors.append(ParseError(lineno, exc.reason, line))
    return flows, errors


def parse_flow_records(stream: IO[str], format: str = "csv") -> Tuple[List[FlowRecord], List[ParseError]]:
    if format == "csv":
        return _parse_flow_csv(stream)
    if format == "jsonl":
        return _parse_flow_jsonl(stream)
    raise ValueError(f"unknown flow format {format!r}")


def _flow_row(f: FlowRecord) -> dict:
    return {
        "START_NSEC": f.start_ns,
        "END_NSEC": f.end_ns,
        "L3_IPV4_SRC": f.l3_ipv4_src,
        "L3_IPV4_DST": f.l3_ipv4_dst,
        "L4_PORT_SRC": f.l4_port_src,
        "L4_PORT_DST": f.l4_port_dst,
        "BYTES_A": f.bytes_a,
        "BYTES_B": f.bytes_b,
        "HTTP_REQUEST_HOST": f.http_request_host or "",
        FLOW_ID_COLUMN: f.source_id,
    }


def write_flow_records(flows: Iterable[FlowRecord], stream: IO[str], format: str = "csv") -> None:
    if format == "csv":
        writer = csv.DictWriter(stream, fieldnames=list(FLOW_COLUMNS) + [FLOW_ID_COLUMN],
                                lineterminator="\n")
        writer.writeheader()
        for f in flows:
            writer.writerow(_flow_row(f))
    elif format == "jsonl":
        for f in flows:
            stream.write(json.dumps(_flow_row(f)) + "\n")
    else:
        raise ValueError(f"unknown flow format {format!r}")


def flow_format_for(path: str) -> str:
    ext = os.path.splitext(path)[1].lower()
    return "jsonl" if ext in (".jsonl", ".json", ".ndjson") else "csv"


def load_events(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_event_log(fh)


def load_flows(path: str, format: Optional[str] = None):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_flow_records(fh, format or flow_format_for(path))


def dumps_events(events: Iterable[EventRecord]) -> str:
    buf = io.StringIO()
    write_event_log(events, buf)
    return buf.getvalue()


def dumps_flows(flows: Iterable[FlowRecord], format: str = "csv") -> str:
    buf = io.StringIO()
    write_flow_records(flows, buf, format)
    return buf.getvalue()
