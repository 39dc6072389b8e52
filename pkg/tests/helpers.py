"""Shared builders and independent oracles for the test suite."""

import random

from evflow.model import NormalizedEvent, NormalizedFlow, TimeWindow, Variant
from evflow.normalize import normalize_event, normalize_flow
from evflow.synth import SynthConfig, generate


def ev(t, sid="e1", s_ip="192.0.2.10", s_port=443, c_ip="198.51.100.7",
       c_port=50234, host="www.example.org"):
    return NormalizedEvent(time_generated=t, s_ip=s_ip, s_port=s_port, c_ip=c_ip,
                           c_port=c_port, cs_host=host, source_id=sid)


def fl(start, end, sid="f1", s_ip="192.0.2.10", s_port=443, c_ip="198.51.100.7",
       c_port=50234, sni="www.example.org"):
    return NormalizedFlow(start_ms=start, end_ms=end, client_ip=c_ip, server_ip=s_ip,
                          client_port=c_port, server_port=s_port, sni=sni, source_id=sid)


def synth_normalized(**kwargs):
    events, flows, labels = generate(SynthConfig(**kwargs))
    return ([normalize_event(e) for e in events],
            [normalize_flow(f) for f in flows], labels)


def random_dataset(rng: random.Random, n_events: int, n_flows: int):
    """Dense small-domain dataset: many key and time collisions, missing features."""
    servers = ["192.0.2.1", "192.0.2.2"]
    clients = ["198.51.100.1", "198.51.100.2", "198.51.100.3"]
    ports = [50000, 50001, None]
    hosts = ["a.example", "b.example", None]
    events = [
        NormalizedEvent(time_generated=rng.randrange(0, 20_000), s_ip=rng.choice(servers),
                        s_port=rng.choice([443, 8443]), c_ip=rng.choice(clients),
                        c_port=rng.choice(ports), cs_host=rng.choice(hosts),
                        source_id=f"e{i}")
        for i in range(n_events)
    ]
    flows = []
    for j in range(n_flows):
        start = rng.randrange(0, 20_000)
        flows.append(NormalizedFlow(
            start_ms=start, end_ms=start + rng.randrange(0, 3000),
            client_ip=rng.choice(clients), server_ip=rng.choice(servers),
            client_port=rng.choice(ports), server_port=rng.choice([443, 8443]),
            sni=rng.choice(hosts), source_id=f"f{j}"))
    return events, flows


def random_window(rng: random.Random) -> TimeWindow:
    return TimeWindow(rng.randint(0, 5) * 1000, rng.randint(0, 5) * 1000)


VARIANTS = list(Variant)


def days_from_civil(y: int, m: int, d: int) -> int:
    """Days since 1970-01-01 for a proleptic Gregorian date (Hinnant's algorithm)."""
    y -= m <= 2
    era = (y if y >= 0 else y - 399) // 400
    yoe = y - era * 400
    doy = (153 * (m + (-3 if m > 2 else 9)) + 2) // 5 + d - 1
    doe = yoe * 365 + yoe // 4 - yoe // 100 + doy
    return era * 146097 + doe - 719468


def epoch_ms(y, mo, d, h, mi, s, ms=0) -> int:
    return ((days_from_civil(y, mo, d) * 24 + h) * 60 + mi) * 60_000 + s * 1000 + ms
