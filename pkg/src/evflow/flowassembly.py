"""Biflow assembly from time-ordered packet summaries.

Records are keyed by the unordered TCP 5-tuple.  A record ends on an
inactive gap, on exceeding the active timeout, or (with ``syn_split``) when
a direction that already sent a SYN in this record sends another one --
the case of back-to-back connections reusing the same ports.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, List, Optional, Tuple

from .ingest import is_ipv4
from .model import FlowRecord

SYN, ACK, FIN, RST = "SYN", "ACK", "FIN", "RST"
TCP_FLAGS = frozenset({SYN, ACK, FIN, RST})

PACKET_COLUMNS = ("timestamp_ms", "src_ip", "dst_ip", "src_port", "dst_port",
                  "tcp_flags", "payload_bytes", "sni")


class UnsortedInputError(ValueError):
    pass


@dataclass(frozen=True)
class PacketSummary:
    timestamp_ms: int
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    tcp_flags: frozenset = frozenset()
    payload_bytes: int = 0
    sni: Optional[str] = None

    def __post_init__(self):
        if self.timestamp_ms < 0:
            raise ValueError("timestamp_ms must be >= 0")
        for p in (self.src_port, self.dst_port):
            if not 1 <= p <= 65535:
                raise ValueError(f"port out of range: {p}")
        flags = frozenset(self.tcp_flags)
        if flags - TCP_FLAGS:
            raise ValueError(f"unknown TCP flags: {sorted(flags - TCP_FLAGS)}")
        object.__setattr__(self, "tcp_flags", flags)

    @property
    def src(self) -> Tuple[str, int]:
        return (self.src_ip, self.src_port)

    @property
    def dst(self) -> Tuple[str, int]:
        return (self.dst_ip, self.dst_port)


@dataclass(frozen=True)
class AssemblyConfig:
    active_timeout_ms: int = 300_000
    inactive_timeout_ms: int = 30_000
    syn_split: bool = True

    def __post_init__(self):
        if self.active_timeout_ms <= 0 or self.inactive_timeout_ms <= 0:
            raise ValueError("timeouts must be positive")


@dataclass
class _Open:
    client: Tuple[str, int]
    server: Tuple[str, int]
    start: int
    last: int
    bytes_a: int = 0
    bytes_b: int = 0
    sni: Optional[str] = None
    syn_dirs: set = field(default_factory=set)

    def to_record(self) -> FlowRecord:
        return FlowRecord(
            start_ns=self.start * 1_000_000,
            end_ns=self.last * 1_000_000,
            l3_ipv4_src=self.client[0],
            l3_ipv4_dst=self.server[0],
            l4_port_src=self.client[1],
            l4_port_dst=self.server[1],
            bytes_a=self.bytes_a,
            bytes_b=self.bytes_b,
            http_request_host=self.sni,
        )


def _orientation(p: PacketSummary, known_client=None):
    if SYN in p.tcp_flags and ACK not in p.tcp_flags:
        return p.src, p.dst
    if SYN in p.tcp_flags:  # SYN-ACK comes from the server
        return p.dst, p.src
    if known_client is not None and known_client in (p.src, p.dst):
        return known_client, (p.dst if known_client == p.src else p.src)
    return p.src, p.dst


def assemble_flows(packets: Iterable[PacketSummary], config: AssemblyConfig = AssemblyConfig()) -> List[FlowRecord]:
    """Build flow records; output is ordered by start time and numbered."""
    active: dict = {}
    clients: dict = {}  # key -> client endpoint of the latest record
    done: List[Tuple[tuple, _Open]] = []
    prev_ts = None
    for p in packets:
        if prev_ts is not None and p.timestamp_ms < prev_ts:
            raise UnsortedInputError(
                f"packet at {p.timestamp_ms} ms follows one at {prev_ts} ms")
        prev_ts = p.timestamp_ms
        key = tuple(sorted((p.src, p.dst)))
        rec = active.get(key)
        if rec is not None:
            direction = "a" if p.src == rec.client else "b"
            expired = (p.timestamp_ms - rec.last > config.inactive_timeout_ms
                       or p.timestamp_ms - rec.start > config.active_timeout_ms)
            resyn = config.syn_split and SYN in p.tcp_flags and direction in rec.syn_dirs
            if expired or resyn:
                done.append((key, rec))
                rec = None
        if rec is None:
            client, server = _orientation(p, clients.get(key))
            rec = _Open(client, server, p.timestamp_ms, p.timestamp_ms)
            active[key] = rec
            clients[key] = client
        direction = "a" if p.src == rec.client else "b"
        if direction == "a":
            rec.bytes_a += p.payload_bytes
        else:
            rec.bytes_b += p.payload_bytes
        if SYN in p.tcp_flags:
            rec.syn_dirs.add(direction)
        if rec.sni is None and p.sni:
            rec.sni = p.sni
        rec.last = p.timestamp_ms
    done.extend(active.items())
    done.sort(key=lambda kr: (kr[1].start, kr[0], kr[1].last))
    out = []
    for i, (_, rec) in enumerate(done, start=1):
        out.append(replace(rec.to_record(), source_id=f"flow-{i}"))
    return out


# ---------------------------------------------------------------- I/O

def _packet_from_row(row: dict) -> PacketSummary:
    flags = row.get("tcp_flags") or ""
    if isinstance(flags, str):
        flags = [f for f in flags.replace(",", "|").split("|") if f]
    for ip in (row["src_ip"], row["dst_ip"]):
        if not is_ipv4(str(ip)):
            raise ValueError(f"bad IPv4 address {ip!r}")
    return PacketSummary(
        timestamp_ms=int(row["timestamp_ms"]),
        src_ip=str(row["src_ip"]),
        dst_ip=str(row["dst_ip"]),
        src_port=int(row["src_port"]),
        dst_port=int(row["dst_port"]),
        tcp_flags=frozenset(str(f).upper() for f in flags),
        payload_bytes=int(row.get("payload_bytes") or 0),
        sni=row.get("sni") or None,
    )


def read_packets(stream: IO[str], format: str = "csv") -> List[PacketSummary]:
    """Read packet summaries; raises ValueError naming the first bad line."""
    packets = []
    if format == "csv":
        reader = csv.DictReader(stream)
        rows = ((reader.line_num, row) for row in reader)
    elif format == "jsonl":
        rows = ((n, json.loads(line)) for n, line in enumerate(stream, start=1) if line.strip())
    else:
        raise ValueError(f"unknown packet format {format!r}")
    for lineno, row in rows:
        try:
            packets.append(_packet_from_row(row))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return packets


def write_packets(packets: Iterable[PacketSummary], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(PACKET_COLUMNS)
    for p in packets:
        w.writerow([p.timestamp_ms, p.src_ip, p.dst_ip, p.src_port, p.dst_port,
                    "|".join(sorted(p.tcp_flags)), p.payload_bytes, p.sni or ""])
