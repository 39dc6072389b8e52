"""Synthetic event/flow datasets with known ground-truth relations.

Every session is one HTTPS connection (one flow) that causes one or more
log events.  Feature values are shared by construction; all divergence
comes from explicit knobs (lag, drift, drops, crawler duplicates, sibling
connections that collide on reduced feature sets, masking) so that every
false positive or negative in a test can be traced back to a knob.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .ingest import write_event_log, write_flow_records
from .model import EventRecord, FlowRecord, NormalizedFlow


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Distribution:
    """``constant:v``, ``uniform:a,b`` or ``normal:mu,sigma`` (milliseconds)."""

    kind: str
    params: Tuple[float, ...]

    @classmethod
    def parse(cls, spec: Union[str, float, int, "Distribution", Sequence]) -> "Distribution":
        if isinstance(spec, Distribution):
            return spec
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return cls("constant", (float(spec),))
        if isinstance(spec, str):
            kind, _, rest = spec.partition(":")
            try:
                params = tuple(float(x) for x in rest.split(",")) if rest else ()
            except ValueError:
                raise ConfigError(f"malformed distribution {spec!r}") from None
        elif isinstance(spec, (list, tuple)) and spec and isinstance(spec[0], str):
            kind = spec[0]
            try:
                params = tuple(float(x) for x in spec[1:])
            except (TypeError, ValueError):
                raise ConfigError(f"malformed distribution {spec!r}") from None
        else:
            raise ConfigError(f"malformed distribution {spec!r}")
        kind = kind.strip().lower()
        arity = {"constant": 1, "uniform": 2, "normal": 2}
        if kind not in arity or len(params) != arity[kind]:
            raise ConfigError(f"malformed distribution {spec!r}")
        if kind == "uniform" and params[0] > params[1]:
            raise ConfigError(f"uniform bounds reversed in {spec!r}")
        if kind == "normal" and params[1] < 0:
            raise ConfigError(f"negative sigma in {spec!r}")
        return cls(kind, params)

    def sample(self, rng: random.Random) -> float:
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "uniform":
            return rng.uniform(*self.params)
        return rng.gauss(*self.params)

    def __str__(self) -> str:
        return f"{self.kind}:" + ",".join(f"{p:g}" for p in self.params)


@dataclass(frozen=True)
class ServerSpec:
    ip: str
    port: int
    hostnames: Tuple[str, ...]


def default_server_pool() -> Tuple[ServerSpec, ...]:
    return tuple(
        ServerSpec(f"192.0.2.{10 + i}", 443,
                   tuple(f"site{i * 3 + j}.example.org" for j in range(3)))
        for i in range(8)
    )


@dataclass(frozen=True)
class SynthConfig:
    session_count: int = 1000
    server_pool: Tuple[ServerSpec, ...] = field(default_factory=default_server_pool)
    client_pool_size: int = 200
    start_time_ms: int = 1_627_603_200_000  # 2021-07-30T00:00:00Z
    span_ms: int = 3_600_000
    flow_duration_ms: Union[str, Distribution] = "uniform:1000,20000"
    event_lag_ms: Union[str, Distribution] = "constant:0"
    clock_drift_ms_per_source: Dict[str, float] = field(default_factory=dict)
    max_events_per_session: int = 1
    event_drop_rate: float = 0.0
    flow_drop_rate: float = 0.0
    crawler_duplicate_rate: float = 0.0
    duplicate_gap_ms: int = 500
    # sibling connections that collide once client port / SNI are dropped
    port_collision_rate: float = 0.0
    sni_collision_rate: float = 0.0
    collision_gap_ms: int = 1000
    mask_sni: bool = False
    mask_client_port: bool = False
    quantize_event_seconds: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("event_drop_rate", "flow_drop_rate", "crawler_duplicate_rate",
                     "port_collision_rate", "sni_collision_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be a probability, got {v}")
        if self.session_count < 0:
            raise ConfigError("session_count must be >= 0")
        if self.client_pool_size < 1 or not self.server_pool:
            raise ConfigError("client and server pools must be non-empty")
        if self.max_events_per_session < 1:
            raise ConfigError("max_events_per_session must be >= 1")
        if self.span_ms < 1 or self.duplicate_gap_ms < 0 or self.collision_gap_ms < 0:
            raise ConfigError("span and gaps must be non-negative (span positive)")
        pool = tuple(s if isinstance(s, ServerSpec) else ServerSpec(s[0], int(s[1]), tuple(s[2]))
                     for s in self.server_pool)
        object.__setattr__(self, "server_pool", pool)
        object.__setattr__(self, "flow_duration_ms", Distribution.parse(self.flow_duration_ms))
        object.__setattr__(self, "event_lag_ms", Distribution.parse(self.event_lag_ms))

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        data = dict(data)
        if "server_pool" in data:
            data["server_pool"] = tuple(
                ServerSpec(s["ip"], int(s["port"]), tuple(s["hostnames"])) if isinstance(s, dict)
                else tuple(s)
                for s in data["server_pool"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class GroundTruthLabels:
    intended_pairs: frozenset
    dropped_event_ids: frozenset
    dropped_flow_ids: frozenset
    duplicate_groups: Tuple[frozenset, ...]
    collisions: Tuple[Tuple[str, str, str], ...] = ()  # (kind, flow id, sibling flow id)

    def to_dict(self) -> dict:
        return {
            "intended_pairs": [list(p) for p in sorted(self.intended_pairs)],
            "dropped_event_ids": sorted(self.dropped_event_ids),
            "dropped_flow_ids": sorted(self.dropped_flow_ids),
            "duplicate_groups": [sorted(g) for g in self.duplicate_groups],
            "collisions": [list(c) for c in self.collisions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruthLabels":
        return cls(
            intended_pairs=frozenset(tuple(p) for p in data["intended_pairs"]),
            dropped_event_ids=frozenset(data["dropped_event_ids"]),
            dropped_flow_ids=frozenset(data["dropped_flow_ids"]),
            duplicate_groups=tuple(frozenset(g) for g in data["duplicate_groups"]),
            collisions=tuple(tuple(c) for c in data.get("collisions", ())),
        )


@dataclass
class _Session:
    start: int
    duration: int
    client: str
    server: ServerSpec
    host: str
    port: Optional[int] = None
    parent: Optional["_Session"] = None
    kind: str = "base"  # base | port | sni


def _client_ips(n: int) -> List[str]:
    # 198.18.0.0/15 benchmarking range, skipping .0 and .255 host octets
    out = []
    i = 0
    while len(out) < n:
        b, c = divmod(i, 254)
        out.append(f"198.{18 + b // 256}.{b % 256}.{c + 1}")
        i += 1
    return out


def generate(config: SynthConfig) -> Tuple[List[EventRecord], List[FlowRecord], GroundTruthLabels]:
    """Generate a dataset; deterministic for a given config (seed included)."""
    rng = random.Random(config.seed)
    clients = _client_ips(config.client_pool_size)

    sessions: List[_Session] = []
    for _ in range(config.session_count):
        server = rng.choice(config.server_pool)
        sessions.append(_Session(
            start=config.start_time_ms + rng.randrange(config.span_ms),
            duration=max(0, int(config.flow_duration_ms.sample(rng))),
            client=rng.choice(clients),
            server=server,
            host=rng.choice(server.hostnames),
        ))
    sessions.sort(key=lambda s: s.start)

    siblings = []
    for s in sessions:
        if config.port_collision_rate and rng.random() < config.port_collision_rate:
            siblings.append(_Session(
                start=s.start + rng.randint(0, config.collision_gap_ms),
                duration=max(0, int(config.flow_duration_ms.sample(rng))),
                client=s.client, server=s.server, host=s.host, parent=s, kind="port"))
        if config.sni_collision_rate and rng.random() < config.sni_collision_rate:
            others = [h for h in s.server.hostnames if h != s.host]
            if others:
                siblings.append(_Session(
                    start=s.start + s.duration + rng.randint(1, max(1, config.collision_gap_ms)),
                    duration=max(0, int(config.flow_duration_ms.sample(rng))),
                    client=s.client, server=s.server, host=rng.choice(others),
                    parent=s, kind="sni"))
    sessions = sorted(sessions + siblings, key=lambda s: (s.start, s.kind != "base"))

    # sequential ephemeral ports per client, as an OS allocates them
    next_port = {c: rng.randint(49152, 65535) for c in clients}
    for s in sessions:
        if s.kind == "sni":
            continue
        p = next_port[s.client]
        s.port = p
        next_port[s.client] = 49152 if p == 65535 else p + 1
    for s in sessions:
        if s.kind == "sni":
            s.port = s.parent.port

    events: List[EventRecord] = []
    flows: List[FlowRecord] = []
    intended = set()
    dropped_e, dropped_f = set(), set()
    dup_groups = []
    collisions = []
    flow_id_of = {}

    def emit_flow(fid: str, s: _Session, start_ms: int, end_ms: int):
        if config.flow_drop_rate and rng.random() < config.flow_drop_rate:
            dropped_f.add(fid)
            return
        j0 = rng.randrange(1_000_000)
        start_ns = start_ms * 1_000_000 + j0
        end_ns = end_ms * 1_000_000 + rng.randrange(1_000_000)
        if end_ns < start_ns:
            end_ns = start_ns
        flows.append(FlowRecord(
            start_ns=start_ns, end_ns=end_ns,
            l3_ipv4_src=s.client, l3_ipv4_dst=s.server.ip,
            l4_port_src=s.port, l4_port_dst=s.server.port,
            bytes_a=rng.randint(500, 5000), bytes_b=rng.randint(1000, 500_000),
            http_request_host=None if config.mask_sni else s.host,
            source_id=fid,
        ))

    for idx, s in enumerate(sessions):
        fid = f"f{idx:06d}"
        flow_id_of[id(s)] = fid
        end = s.start + s.duration
        drift = config.clock_drift_ms_per_source.get(s.server.ip, 0.0)
        n_events = rng.randint(1, config.max_events_per_session)
        first_t = None
        for k in range(n_events):
            offset = 0 if k == 0 else rng.randint(0, s.duration)
            t = s.start + offset + config.event_lag_ms.sample(rng) + drift
            t = max(0, int(t // 1000 * 1000) if config.quantize_event_seconds else int(t))
            eid = f"e{idx:06d}-{k}"
            intended.add((eid, fid))
            if first_t is None:
                first_t = (eid, t)
            if config.event_drop_rate and rng.random() < config.event_drop_rate:
                dropped_e.add(eid)
                continue
            events.append(EventRecord(
                time_generated=t, s_ip=s.server.ip, s_port=s.server.port,
                c_ip=s.client, c_port=None if config.mask_client_port else s.port,
                cs_host=s.host, sc_bytes=rng.randint(1000, 500_000),
                cs_bytes=rng.randint(200, 5000), cs_uri_stem=f"/page/{rng.randint(1, 50)}",
                cs_user_agent="Mozilla/5.0+(X11;+Linux+x86_64)", source_id=eid,
            ))
        emit_flow(fid, s, s.start, end)
        if s.parent is not None:
            collisions.append((s.kind, flow_id_of[id(s.parent)], fid))
        if config.crawler_duplicate_rate and rng.random() < config.crawler_duplicate_rate:
            # repeated request on the same 5-tuple, shortly after the shared event
            dup_id = f"{fid}-dup"
            eid, t = first_t
            dup_start = t + config.duplicate_gap_ms
            emit_flow(dup_id, s, dup_start, dup_start + s.duration)
            intended.add((eid, dup_id))
            dup_groups.append(frozenset({fid, dup_id}))

    events.sort(key=lambda e: (e.time_generated, e.source_id))
    flows.sort(key=lambda f: (f.start_ns, f.source_id))
    labels = GroundTruthLabels(
        intended_pairs=frozenset(intended),
        dropped_event_ids=frozenset(dropped_e),
        dropped_flow_ids=frozenset(dropped_f),
        duplicate_groups=tuple(dup_groups),
        collisions=tuple(collisions),
    )
    return events, flows, labels


MASK_PROFILES = ("tls12", "tls13", "quic", "no-client-port")


def mask_features(events, flows, profile: str):
    """Blank the features a deployment cannot observe.

    TLS 1.3 (with encrypted SNI) and QUIC hide the server name from the
    flow exporter; older IIS versions cannot log the client port.
    """
    if profile not in MASK_PROFILES:
        raise ValueError(f"unknown masking profile {profile!r}")
    events, flows = list(events), list(flows)
    if profile in ("tls13", "quic"):
        flows = [_blank_sni(f) for f in flows]
    elif profile == "no-client-port":
        events = [replace(e, c_port=None) for e in events]
    return events, flows


def _blank_sni(f):
    if isinstance(f, NormalizedFlow):
        return replace(f, sni=None)
    return replace(f, http_request_host=None)


def write_dataset(out_dir: str, events, flows, labels: GroundTruthLabels,
                  flow_format: str = "csv") -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "events": os.path.join(out_dir, "events.log"),
        "flows": os.path.join(out_dir, "flows.csv" if flow_format == "csv" else "flows.jsonl"),
        "labels": os.path.join(out_dir, "labels.json"),
    }
    with open(paths["events"], "w", encoding="utf-8", newline="\n") as fh:
        write_event_log(events, fh)
    with open(paths["flows"], "w", encoding="utf-8", newline="") as fh:
        write_flow_records(flows, fh, flow_format)
    with open(paths["labels"], "w", encoding="utf-8") as fh:
        json.dump(labels.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return paths

