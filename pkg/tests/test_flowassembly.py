import io

import pytest
from hypothesis import given, strategies as st

from evflow.flowassembly import (
    ACK, FIN, RST, SYN, AssemblyConfig, PacketSummary, UnsortedInputError,
    assemble_flows, read_packets, write_packets,
)

C, S = ("198.51.100.7", 50234), ("192.0.2.10", 443)


def pkt(t, frm, flags=(), size=0, sni=None):
    to = S if frm == C else C
    return PacketSummary(t, frm[0], to[0], frm[1], to[1], frozenset(flags), size, sni)


def connection(t0, sni="a.example", close=500):
    return [
        pkt(t0, C, {SYN}),
        pkt(t0 + 10, S, {SYN, ACK}),
        pkt(t0 + 20, C, {ACK}, 300, sni),
        pkt(t0 + 30, S, {ACK}, 4000),
        pkt(t0 + close, C, {FIN, ACK}),
    ]


SPLIT = AssemblyConfig(active_timeout_ms=300_000, inactive_timeout_ms=30_000, syn_split=True)
MERGE = AssemblyConfig(active_timeout_ms=300_000, inactive_timeout_ms=30_000, syn_split=False)


def test_port_reuse_split():
    packets = connection(0) + connection(1000)
    split = assemble_flows(packets, SPLIT)
    merged = assemble_flows(packets, MERGE)
    assert [(f.start_ns // 10**6, f.end_ns // 10**6) for f in split] == [(0, 500), (1000, 1500)]
    assert [(f.start_ns // 10**6, f.end_ns // 10**6) for f in merged] == [(0, 1500)]
    assert merged[0].bytes_a == 600 and merged[0].bytes_b == 8000


def test_single_connection():
    (f,) = assemble_flows(connection(7), SPLIT)
    assert (f.start_ns, f.end_ns) == (7 * 10**6, 507 * 10**6)
    assert (f.l3_ipv4_src, f.l4_port_src, f.l3_ipv4_dst, f.l4_port_dst) == (C[0], C[1], S[0], S[1])
    assert (f.bytes_a, f.bytes_b, f.http_request_host) == (300, 4000, "a.example")
    assert f.source_id == "flow-1"


def test_sni_of_reused_connection():
    packets = connection(0, sni="a.example") + connection(1000, sni="b.example")
    assert [f.http_request_host for f in assemble_flows(packets, SPLIT)] == ["a.example", "b.example"]
    assert [f.http_request_host for f in assemble_flows(packets, MERGE)] == ["a.example"]


def test_syn_ack_alone_never_splits():
    packets = [pkt(0, C, {SYN}), pkt(5, S, {SYN, ACK}), pkt(6, C, {ACK}, 10)]
    assert len(assemble_flows(packets, SPLIT)) == 1


def test_client_is_syn_sender_even_if_server_speaks_first():
    packets = [pkt(0, S, {SYN, ACK}), pkt(1, C, {ACK}, 10)]
    (f,) = assemble_flows(packets, SPLIT)
    assert f.l3_ipv4_src == C[0] and f.bytes_a == 10


def test_inactive_timeout():
    cfg = AssemblyConfig(active_timeout_ms=10**9, inactive_timeout_ms=1000, syn_split=False)
    packets = [pkt(0, C, {SYN}), pkt(1000, C, {ACK}), pkt(2001, S, {ACK}, 5)]
    flows = assemble_flows(packets, cfg)
    assert [(f.start_ns // 10**6, f.end_ns // 10**6) for f in flows] == [(0, 1000), (2001, 2001)]
    # orientation survives the split even though the server spoke first
    assert flows[1].l3_ipv4_src == C[0] and flows[1].bytes_b == 5


def test_active_timeout_split_point():
    cfg = AssemblyConfig(active_timeout_ms=1000, inactive_timeout_ms=10**9, syn_split=False)
    packets = [pkt(t, C, {ACK}, 1) for t in (0, 400, 1000, 1001, 1500, 2100)]
    flows = assemble_flows(packets, cfg)
    assert [(f.start_ns // 10**6, f.end_ns // 10**6) for f in flows] == [(0, 1000), (1001, 1500), (2100, 2100)]


def test_rst_is_ordinary():
    packets = [pkt(0, C, {SYN}), pkt(1, S, {RST}), pkt(2, C, {ACK}, 1)]
    assert len(assemble_flows(packets, SPLIT)) == 1


def test_unsorted_and_empty():
    assert assemble_flows([], SPLIT) == []
    with pytest.raises(UnsortedInputError):
        assemble_flows([pkt(5, C), pkt(4, C)], SPLIT)


def test_config_validation():
    with pytest.raises(ValueError):
        AssemblyConfig(active_timeout_ms=0)


def test_packet_csv_round_trip():
    packets = connection(0) + connection(1000, sni="b.example")
    buf = io.StringIO()
    write_packets(packets, buf)
    buf.seek(0)
    assert read_packets(buf) == packets


ENDPOINTS = [("10.0.0.1", 40000), ("10.0.0.1", 40001), ("10.0.0.2", 40000), ("192.0.2.1", 443)]


@st.composite
def streams(draw):
    n = draw(st.integers(0, 60))
    t = 0
    packets = []
    for _ in range(n):
        t += draw(st.integers(0, 3000))
        a, b = draw(st.permutations(ENDPOINTS))[:2]
        flags = draw(st.sets(st.sampled_from([SYN, ACK, FIN, RST]), max_size=2))
        packets.append(PacketSummary(t, a[0], b[0], a[1], b[1], frozenset(flags),
                                     draw(st.integers(0, 1500)),
                                     draw(st.none() | st.sampled_from(["x.example", "y.example"]))))
    return packets


configs = st.builds(AssemblyConfig, st.integers(1, 20000), st.integers(1, 10000), st.booleans())


@given(streams(), configs)
def test_conservation_and_ordering(packets, cfg):
    flows = assemble_flows(packets, cfg)
    assert sum(f.bytes_a + f.bytes_b for f in flows) == sum(p.payload_bytes for p in packets)
    by_key = {}
    for f in flows:
        key = tuple(sorted([(f.l3_ipv4_src, f.l4_port_src), (f.l3_ipv4_dst, f.l4_port_dst)]))
        by_key.setdefault(key, []).append(f)
    for recs in by_key.values():
        for a, b in zip(recs, recs[1:]):
            assert a.end_ns < b.start_ns or (a.end_ns == b.start_ns)
            assert a.start_ns <= b.start_ns


@given(streams(), st.integers(1, 10000))
def test_no_split_is_coarsening_of_split(packets, inactive):
    big = 10**12
    split = assemble_flows(packets, AssemblyConfig(big, inactive, True))
    merged = assemble_flows(packets, AssemblyConfig(big, inactive, False))

    def key(f):
        return tuple(sorted([(f.l3_ipv4_src, f.l4_port_src), (f.l3_ipv4_dst, f.l4_port_dst)]))

    for m in merged:
        parts = [s for s in split if key(s) == key(m) and m.start_ns <= s.start_ns <= m.end_ns]
        assert parts and parts[0].start_ns == m.start_ns and parts[-1].end_ns == m.end_ns
        assert sum(p.bytes_a + p.bytes_b for p in parts) == m.bytes_a + m.bytes_b
    assert len(split) >= len(merged)
