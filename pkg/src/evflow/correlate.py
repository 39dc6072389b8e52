"""Event-flow correlation and relation cardinality classification.

Three implementations of the same match predicate live here:

* :func:`correlate` -- hash join on the variant's exact-match key followed by
  a sorted-interval probe on time.  This is the one the pipeline uses.
* :func:`brute_force_correlate` -- evaluates the predicate on every
  event x flow pair (numpy, block-wise).  Oracle for tests.
* :func:`nested_loop_correlate` -- the same predicate as a literal double
  loop over Python objects.  Oracle for the oracle, small inputs only.

A window of ``None`` means unbounded: time is ignored entirely.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from collections import defaultdict
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .model import (
    CLIENT_PORT, ERR1, ERR2, OK, SNI, ClassifiedReport, InconsistentInputError,
    NormalizedEvent, NormalizedFlow, RelationSet, TimeWindow, Variant,
    required_features,
)


def _key_spec(variant: Variant) -> Tuple[bool, bool]:
    req = required_features(variant)
    return CLIENT_PORT in req, SNI in req


def event_key(e: NormalizedEvent, variant: Variant) -> Optional[tuple]:
    """Exact-match key of an event, or None when a required feature is absent."""
    use_port, use_sni = _key_spec(variant)
    key = (e.s_ip, e.s_port, e.c_ip)
    if use_port:
        key += (e.c_port,)
    if use_sni:
        key += (e.cs_host,)
    return None if any(v is None for v in key) else key


def flow_key(f: NormalizedFlow, variant: Variant) -> Optional[tuple]:
    use_port, use_sni = _key_spec(variant)
    key = (f.server_ip, f.server_port, f.client_ip)
    if use_port:
        key += (f.client_port,)
    if use_sni:
        key += (f.sni,)
    return None if any(v is None for v in key) else key


def partition_key(record) -> tuple:
    """(server IP, server port, client IP) -- compared by every variant."""
    if isinstance(record, NormalizedFlow):
        return (record.server_ip, record.server_port, record.client_ip)
    return (record.s_ip, record.s_port, record.c_ip)


def in_window(t, start, end, window: Optional[TimeWindow]) -> bool:
    if window is None:
        return True
    return start - window.earliness <= t and end + window.lateness >= t


def matches(e: NormalizedEvent, f: NormalizedFlow, variant: Variant,
            window: Optional[TimeWindow]) -> bool:
    """The match predicate for a single pair, feature by feature."""
    variant = Variant.parse(variant)
    use_port, use_sni = _key_spec(variant)
    if not (f.server_ip == e.s_ip and f.client_ip == e.c_ip and f.server_port == e.s_port):
        return False
    if use_port and (e.c_port is None or f.client_port != e.c_port):
        return False
    if use_sni and (e.cs_host is None or f.sni != e.cs_host):
        return False
    return in_window(e.time_generated, f.start_ms, f.end_ms, window)


def nested_loop_correlate(events, flows, variant, window) -> RelationSet:
    variant = Variant.parse(variant)
    pairs = set()
    for f in flows:
        for e in events:
            if matches(e, f, variant, window):
                pairs.add((e.source_id, f.source_id))
    return RelationSet(frozenset(pairs))


class _Codes:
    """Maps hashable values to dense non-negative ints; None -> -1."""

    def __init__(self):
        self._codes: Dict[Hashable, int] = {}

    def __call__(self, values: Iterable) -> np.ndarray:
        out = []
        for v in values:
            if v is None:
                out.append(-1)
            else:
                out.append(self._codes.setdefault(v, len(self._codes)))
        return np.asarray(out, dtype=np.int64)


def brute_force_correlate(events: Sequence[NormalizedEvent], flows: Sequence[NormalizedFlow],
                          variant, window: Optional[TimeWindow],
                          block: int = 512) -> RelationSet:
    """Evaluate the match predicate on all |events| x |flows| pairs."""
    variant = Variant.parse(variant)
    events, flows = list(events), list(flows)
    if not events or not flows:
        return RelationSet()
    use_port, use_sni = _key_spec(variant)

    def ekey(e):
        return (e.s_ip, e.s_port, e.c_ip, e.c_port if use_port else 0, e.cs_host if use_sni else "")

    def fkey(f):
        return (f.server_ip, f.server_port, f.client_ip, f.client_port if use_port else 0,
                f.sni if use_sni else "")

    # one code per full feature tuple; a tuple with an absent feature gets -1
    codes = _Codes()
    key_e = codes(None if None in k else k for k in map(ekey, events))
    key_f = codes(None if None in k else k for k in map(fkey, flows))
    t = np.array([e.time_generated for e in events], dtype=np.int64)
    start = np.array([f.start_ms for f in flows], dtype=np.int64)
    end = np.array([f.end_ms for f in flows], dtype=np.int64)
    if window is not None:
        lo = start - window.earliness
        hi = end + window.lateness

    pairs = set()
    for b in range(0, len(events), block):
        sl = slice(b, b + block)
        ke = key_e[sl, None]
        m = (ke == key_f[None, :]) & (ke >= 0)
        if window is not None:
            tt = t[sl, None]
            m &= (lo[None, :] <= tt) & (hi[None, :] >= tt)
        ei, fi = np.nonzero(m)
        for i, j in zip(ei.tolist(), fi.tolist()):
            pairs.add((events[b + i].source_id, flows[j].source_id))
    return RelationSet(frozenset(pairs))


class _Bucket:
    __slots__ = ("starts", "ends", "ids", "max_len")

    def __init__(self, flows: List[NormalizedFlow]):
        flows.sort(key=lambda f: (f.start_ms, f.end_ms, f.source_id))
        self.starts = [f.start_ms for f in flows]
        self.ends = [f.end_ms for f in flows]
        self.ids = [f.source_id for f in flows]
        self.max_len = max(f.end_ms - f.start_ms for f in flows)


def correlate(events: Iterable[NormalizedEvent], flows: Iterable[NormalizedFlow],
              variant, window: Optional[TimeWindow]) -> RelationSet:
    """Match events to flows on the variant's features and the time window.

    A pair matches when every required feature is equal and
    ``flow.start - earliness <= event.time <= flow.end + lateness``.
    Ambiguities are not resolved: an event inside two flows' windows
    produces both pairs.
    """
    variant = Variant.parse(variant)
    grouped: Dict[tuple, List[NormalizedFlow]] = defaultdict(list)
    for f in flows:
        k = flow_key(f, variant)
        if k is not None:
            grouped[k].append(f)
    if not grouped:
        return RelationSet()
    index = {k: _Bucket(v) for k, v in grouped.items()}

    pairs = set()
    for e in events:
        k = event_key(e, variant)
        bucket = index.get(k) if k is not None else None
        if bucket is None:
            continue
        t = e.time_generated
        if window is None:
            pairs.update((e.source_id, fid) for fid in bucket.ids)
            continue
        earliness, lateness = window.earliness, window.lateness
        # widened by 1 ms: the bisect only narrows, the exact test decides
        lo = bisect_left(bucket.starts, t - lateness - bucket.max_len - 1)
        hi = bisect_right(bucket.starts, t + earliness + 1)
        starts, ends, ids = bucket.starts, bucket.ends, bucket.ids
        for i in range(lo, hi):
            if starts[i] - earliness <= t and ends[i] + lateness >= t:
                pairs.add((e.source_id, ids[i]))
    return RelationSet(frozenset(pairs))


def classify_relations(relations: RelationSet, events: Iterable[NormalizedEvent],
                       flows: Iterable[NormalizedFlow]) -> ClassifiedReport:
    """Cardinality classes: unmatched -> ERR1, event with >= 2 flows -> ERR2.

    A flow matched by any number of events is OK; multiplicity is only an
    error from the event's side.
    """
    event_ids = [e.source_id for e in events]
    flow_ids = [f.source_id for f in flows]
    per_event = dict.fromkeys(event_ids, 0)
    per_flow = dict.fromkeys(flow_ids, 0)
    for eid, fid in relations.pairs:
        if eid not in per_event:
            raise InconsistentInputError(f"relation references unknown event {eid!r}")
        if fid not in per_flow:
            raise InconsistentInputError(f"relation references unknown flow {fid!r}")
        per_event[eid] += 1
        per_flow[fid] += 1

    event_classes = {}
    for eid, n in per_event.items():
        event_classes[eid] = ERR1 if n == 0 else (OK if n == 1 else ERR2)
    flow_classes = {fid: (OK if n else ERR1) for fid, n in per_flow.items()}

    single_events = sum(1 for n in per_event.values() if n == 0)
    single_flows = sum(1 for n in per_flow.values() if n == 0)
    return ClassifiedReport(
        single_events=single_events,
        single_flows=single_flows,
        correlated_events=len(per_event) - single_events,
        correlated_flows=len(per_flow) - single_flows,
        polygamous_events=sum(1 for n in per_event.values() if n >= 2),
        event_classes=event_classes,
        flow_classes=flow_classes,
    )
