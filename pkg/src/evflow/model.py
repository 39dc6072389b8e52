"""Domain types shared by every stage of the event-flow pipeline.

Events are web-server log lines (IIS/W3C field roles), flows are
bidirectional flow records with the HTTPS client as the source endpoint.
All types are frozen dataclasses and carry no behaviour beyond validation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional

# Feature names used by the variants and by filtering reasons.
TIME = "time"
SERVER_IP = "server_ip"
SERVER_PORT = "server_port"
CLIENT_IP = "client_ip"
CLIENT_PORT = "client_port"
SNI = "sni"

BASE_FEATURES = frozenset({TIME, SERVER_IP, SERVER_PORT, CLIENT_IP})

OK = "OK"
ERR1 = "ERR1"
ERR2 = "ERR2"


class InconsistentInputError(ValueError):
    """Inputs contradict each other (unknown ids, impossible universes)."""


def _check_port(value: Optional[int], name: str, optional: bool = False) -> None:
    if value is None:
        if not optional:
            raise ValueError(f"{name} is required")
        return
    if not 1 <= value <= 65535:
        raise ValueError(f"{name} out of range: {value}")


class Variant(str, enum.Enum):
    """Feature set of one correlation method."""

    ALL_PARAMS = "all-params"
    NO_SNI = "no-sni"
    NO_PORT = "no-port"
    NO_PORT_SNI = "no-port-sni"

    @classmethod
    def parse(cls, name: "str | Variant") -> "Variant":
        if isinstance(name, Variant):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for v in cls:
            if v.value == key:
                return v
        raise ValueError(f"unknown feature set {name!r}; expected one of "
                         + ", ".join(v.value for v in cls))

    def __str__(self) -> str:
        return self.value


# Alias matching the vocabulary used elsewhere in the package.
FeatureSet = Variant

_VARIANT_FEATURES = {
    Variant.ALL_PARAMS: BASE_FEATURES | {CLIENT_PORT, SNI},
    Variant.NO_SNI: BASE_FEATURES | {CLIENT_PORT},
    Variant.NO_PORT: BASE_FEATURES | {SNI},
    Variant.NO_PORT_SNI: BASE_FEATURES,
}


def required_features(variant: "Variant | str") -> frozenset:
    """Features that must be present and equal for a variant to match."""
    return frozenset(_VARIANT_FEATURES[Variant.parse(variant)])


@dataclass(frozen=True)
class EventRecord:
    time_generated: int  # epoch ms, UTC
    s_ip: str
    s_port: int
    c_ip: str
    c_port: Optional[int] = None
    cs_host: Optional[str] = None
    sc_bytes: Optional[int] = None
    cs_bytes: Optional[int] = None
    cs_uri_stem: Optional[str] = None
    cs_user_agent: Optional[str] = None
    source_id: str = ""
    extra: Mapping[str, str] = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        if self.time_generated < 0:
            raise ValueError("time_generated must be >= 0")
        _check_port(self.s_port, "s_port")
        _check_port(self.c_port, "c_port", optional=True)


@dataclass(frozen=True)
class NormalizedEvent(EventRecord):
    """An EventRecord in canonical form (see :mod:`evflow.normalize`)."""


@dataclass(frozen=True)
class FlowRecord:
    start_ns: int
    end_ns: int
    l3_ipv4_src: str  # client
    l3_ipv4_dst: str  # server
    l4_port_src: int
    l4_port_dst: int
    bytes_a: int = 0  # client -> server
    bytes_b: int = 0  # server -> client
    http_request_host: Optional[str] = None
    source_id: str = ""

    def __post_init__(self) -> None:
        if self.start_ns > self.end_ns:
            raise ValueError("start_ns must not exceed end_ns")
        _check_port(self.l4_port_src, "l4_port_src")
        _check_port(self.l4_port_dst, "l4_port_dst")


@dataclass(frozen=True)
class NormalizedFlow:
    """Flow in canonical comparable form; times are epoch milliseconds."""

    start_ms: int
    end_ms: int
    client_ip: str
    server_ip: str
    client_port: Optional[int]
    server_port: int
    bytes_a: int = 0
    bytes_b: int = 0
    sni: Optional[str] = None
    source_id: str = ""

    def __post_init__(self) -> None:
        if self.start_ms > self.end_ms:
            raise ValueError("start_ms must not exceed end_ms")
        _check_port(self.server_port, "server_port")
        _check_port(self.client_port, "client_port", optional=True)


@dataclass(frozen=True)
class TimeWindow:
    """Correlation tolerance in milliseconds.

    ``earliness`` is how long an event may precede the flow start,
    ``lateness`` how long it may follow the flow end.
    """

    earliness: float = 0
    lateness: float = 0

    def __post_init__(self) -> None:
        for name in ("earliness", "lateness"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @classmethod
    def seconds(cls, earliness: float, lateness: float) -> "TimeWindow":
        return cls(_sec_to_ms(earliness), _sec_to_ms(lateness))

    def as_seconds(self) -> tuple:
        return (_ms_to_sec(self.earliness), _ms_to_sec(self.lateness))

    def __le__(self, other: "TimeWindow") -> bool:
        return self.earliness <= other.earliness and self.lateness <= other.lateness

    def __str__(self) -> str:
        e, l = self.as_seconds()
        return f"({e:g}, {l:g})"


def _sec_to_ms(sec: float) -> float:
    ms = sec * 1000
    # keep integral milliseconds integral so they print and hash cleanly
    r = round(ms)
    return int(r) if abs(ms - r) < 1e-9 else ms


def _ms_to_sec(ms: float) -> float:
    s = ms / 1000
    return int(s) if float(s).is_integer() else s


@dataclass(frozen=True)
class RelationSet:
    """Set of (event id, flow id) matches."""

    pairs: frozenset = frozenset()

    def __post_init__(self) -> None:
        if not isinstance(self.pairs, frozenset):
            object.__setattr__(self, "pairs", frozenset(self.pairs))

    @classmethod
    def of(cls, pairs: Iterable[tuple]) -> "RelationSet":
        return cls(frozenset((str(e), str(f)) for e, f in pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple]:
        return iter(sorted(self.pairs))

    def __contains__(self, pair: object) -> bool:
        return pair in self.pairs

    def __le__(self, other: "RelationSet") -> bool:
        return self.pairs <= other.pairs

    def __or__(self, other: "RelationSet") -> "RelationSet":
        return RelationSet(self.pairs | other.pairs)

    def event_ids(self) -> set:
        return {e for e, _ in self.pairs}

    def flow_ids(self) -> set:
        return {f for _, f in self.pairs}


@dataclass(frozen=True)
class ClassifiedReport:
    single_events: int
    single_flows: int
    correlated_events: int
    correlated_flows: int
    polygamous_events: int
    event_classes: Mapping[str, str] = field(default_factory=dict, hash=False, compare=False)
    flow_classes: Mapping[str, str] = field(default_factory=dict, hash=False, compare=False)

    @property
    def total_events(self) -> int:
        return self.single_events + self.correlated_events

    @property
    def total_flows(self) -> int:
        return self.single_flows + self.correlated_flows

    def counters(self) -> dict:
        return {
            "single_flows": self.single_flows,
            "correlated_flows": self.correlated_flows,
            "single_events": self.single_events,
            "correlated_events": self.correlated_events,
            "polygamous_events": self.polygamous_events,
        }


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    conventions: tuple = ()  # which 0/0 conventions were applied

    def to_dict(self) -> dict:
        return {
            "accuracy": f"{self.accuracy:.4f}",
            "precision": f"{self.precision:.4f}",
            "recall": f"{self.recall:.4f}",
            "f1": f"{self.f1:.4f}",
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "conventions": list(self.conventions),
        }
