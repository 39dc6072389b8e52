"""Canonicalization and feature filtering of parsed records."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Tuple, Union

from .model import (
    CLIENT_IP, CLIENT_PORT, SERVER_IP, SERVER_PORT, SNI, TIME,
    EventRecord, FlowRecord, NormalizedEvent, NormalizedFlow, Variant,
    required_features,
)


def canonical_ip(ip: str) -> str:
    return ".".join(str(int(p)) for p in ip.split("."))


def canonical_host(host: Optional[str]) -> Optional[str]:
    if host is None:
        return None
    host = host.strip().lower().rstrip(".")
    return host or None


def _port_or_none(port: Optional[int]) -> Optional[int]:
    return port if port else None


def normalize_event(e: EventRecord) -> NormalizedEvent:
    return NormalizedEvent(
        time_generated=e.time_generated,
        s_ip=canonical_ip(e.s_ip),
        s_port=e.s_port,
        c_ip=canonical_ip(e.c_ip),
        c_port=_port_or_none(e.c_port),
        cs_host=canonical_host(e.cs_host),
        sc_bytes=e.sc_bytes,
        cs_bytes=e.cs_bytes,
        cs_uri_stem=e.cs_uri_stem,
        cs_user_agent=e.cs_user_agent,
        source_id=e.source_id,
        extra=dict(e.extra),
    )


def normalize_flow(f: Union[FlowRecord, NormalizedFlow]) -> NormalizedFlow:
    """Canonical flow with times truncated to whole milliseconds."""
    if isinstance(f, NormalizedFlow):
        return replace(
            f,
            client_ip=canonical_ip(f.client_ip),
            server_ip=canonical_ip(f.server_ip),
            client_port=_port_or_none(f.client_port),
            sni=canonical_host(f.sni),
        )
    return NormalizedFlow(
        start_ms=f.start_ns // 1_000_000,
        end_ms=f.end_ns // 1_000_000,
        client_ip=canonical_ip(f.l3_ipv4_src),
        server_ip=canonical_ip(f.l3_ipv4_dst),
        client_port=_port_or_none(f.l4_port_src),
        server_port=f.l4_port_dst,
        bytes_a=f.bytes_a,
        bytes_b=f.bytes_b,
        sni=canonical_host(f.http_request_host),
        source_id=f.source_id,
    )


def flow_to_record(f: NormalizedFlow) -> FlowRecord:
    """Inverse of :func:`normalize_flow` for writing canonical flow files."""
    if not f.client_port:
        raise ValueError(f"flow {f.source_id} has no client port and cannot be written")
    return FlowRecord(
        start_ns=f.start_ms * 1_000_000,
        end_ns=f.end_ms * 1_000_000,
        l3_ipv4_src=f.client_ip,
        l3_ipv4_dst=f.server_ip,
        l4_port_src=f.client_port,
        l4_port_dst=f.server_port,
        bytes_a=f.bytes_a,
        bytes_b=f.bytes_b,
        http_request_host=f.sni,
        source_id=f.source_id,
    )


def event_features(e: EventRecord) -> dict:
    return {
        TIME: e.time_generated,
        SERVER_IP: e.s_ip,
        SERVER_PORT: e.s_port,
        CLIENT_IP: e.c_ip,
        CLIENT_PORT: e.c_port,
        SNI: e.cs_host,
    }


def flow_features(f: NormalizedFlow) -> dict:
    return {
        TIME: f.start_ms,
        SERVER_IP: f.server_ip,
        SERVER_PORT: f.server_port,
        CLIENT_IP: f.client_ip,
        CLIENT_PORT: f.client_port,
        SNI: f.sni,
    }


@dataclass(frozen=True)
class Rejection:
    kind: str  # "event" | "flow"
    source_id: str
    missing: str  # feature name


# fixed order so the reported reason is deterministic
_FEATURE_ORDER = (TIME, SERVER_IP, SERVER_PORT, CLIENT_IP, CLIENT_PORT, SNI)


def _first_missing(features: dict, required: frozenset) -> Optional[str]:
    for name in _FEATURE_ORDER:
        if name in required and features[name] in (None, ""):
            return name
    return None


def filter_dataset(
    events: Iterable[NormalizedEvent],
    flows: Iterable[NormalizedFlow],
    variant: Variant,
) -> Tuple[List[NormalizedEvent], List[NormalizedFlow], List[Rejection]]:
    """Keep records carrying every feature the variant compares."""
    required = required_features(variant)
    kept_e, kept_f, rejected = [], [], []
    for e in events:
        missing = _first_missing(event_features(e), required)
        if missing is None:
            kept_e.append(e)
        else:
            rejected.append(Rejection("event", e.source_id, missing))
    for f in flows:
        missing = _first_missing(flow_features(f), required)
        if missing is None:
            kept_f.append(f)
        else:
            rejected.append(Rejection("flow", f.source_id, missing))
    return kept_e, kept_f, rejected
