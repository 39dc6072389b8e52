import random

import pytest
from hypothesis import given, strategies as st

from evflow.model import TimeWindow, Variant
from evflow.sweep import SweepConfig, sweep_windows, weighted_error
from evflow.correlate import brute_force_correlate, classify_relations

from helpers import ev, fl, random_dataset, synth_normalized


def test_default_grid_is_36_windows():
    cfg = SweepConfig()
    assert len(cfg.windows()) == 36
    assert (cfg.weight_err1, cfg.weight_err2) == (1.0, 2.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(earliness_values=[])
    with pytest.raises(ValueError):
        SweepConfig(lateness_values=[0, 0])
    with pytest.raises(ValueError):
        SweepConfig(weight_err1=-1)


def test_zero_lag_picks_tightest_window():
    events, flows, _ = synth_normalized(session_count=300, quantize_event_seconds=False, seed=2)
    rep = sweep_windows(events, flows)
    assert rep.chosen == TimeWindow(0, 0)
    assert rep.row_for(rep.chosen).weighted_error == 0


def test_exact_two_second_lag():
    # unquantized events exactly 2000 ms before flow start
    events, flows, _ = synth_normalized(session_count=300, quantize_event_seconds=False,
                                        event_lag_ms="constant:-2000", seed=4)
    rep = sweep_windows(events, flows)
    assert rep.chosen == TimeWindow(2000, 0)
    # oracle: exhaustive correlation at smaller earliness leaves every event single
    for e_ms in (0, 1000):
        rel = brute_force_correlate(events, flows, Variant.ALL_PARAMS, TimeWindow(e_ms, 0))
        assert classify_relations(rel, events, flows).single_events == len(events)


def test_empty_inputs_choose_smallest_window():
    rep = sweep_windows([], [])
    assert rep.chosen == TimeWindow(0, 0)
    assert all(r.weighted_error == 0 for r in rep.rows)


def test_tie_break_prefers_small_windows():
    # one event inside one flow: every window has zero error
    rep = sweep_windows([ev(5)], [fl(0, 10)], config=SweepConfig([2000, 0, 1000], [1000, 0]))
    assert rep.chosen == TimeWindow(0, 0)
    rep = sweep_windows([ev(5)], [fl(0, 10)], config=SweepConfig([1000, 2000], [1000, 0]))
    assert rep.chosen == TimeWindow(1000, 0)


def test_unbounded_reference_not_chosen():
    events = [ev(0, sid="e1")]
    flows = [fl(100_000, 100_001, sid="f1")]
    rep = sweep_windows(events, flows, config=SweepConfig(include_unbounded=True))
    assert rep.unbounded.correlated_events == 1
    assert rep.row_for(rep.chosen).report.correlated_events == 0
    assert "(NA, NA)" in rep.to_csv()


def test_csv_layout():
    rep = sweep_windows([ev(5)], [fl(0, 10)])
    lines = rep.to_csv().splitlines()
    assert lines[0].startswith("Time-Window Size,\"(0, 0)\"")
    assert [l.split(",")[0] for l in lines[1:]] == [
        "Single Flows", "Correlated Flows", "Single Events", "Correlated Events",
        "Polygamous Events", "weighted_error"]
    assert len(lines[0].split("\",\"")) == 36


datasets = st.builds(lambda seed, n, m: random_dataset(random.Random(seed), n, m),
                     st.integers(0, 10**6), st.integers(0, 30), st.integers(0, 30))
weights = st.floats(0, 5, allow_nan=False)


@given(datasets, weights, weights)
def test_weighted_error_recomputable_and_deterministic(data, w1, w2):
    events, flows = data
    cfg = SweepConfig([0, 1000, 3000], [0, 2000], w1, w2)
    rep = sweep_windows(events, flows, Variant.NO_PORT_SNI, cfg)
    for row in rep.rows:
        r = row.report
        assert row.weighted_error == w1 * (r.single_events + r.single_flows) + w2 * r.polygamous_events
        assert row.weighted_error == weighted_error(r, w1, w2)
    assert rep == sweep_windows(events, flows, Variant.NO_PORT_SNI, cfg)
    best = min(r.weighted_error for r in rep.rows)
    assert rep.row_for(rep.chosen).weighted_error == best


@given(datasets, weights)
def test_error_antitone_without_err2_weight(data, w1):
    events, flows = data
    rep = sweep_windows(events, flows, Variant.NO_SNI, SweepConfig(weight_err1=w1, weight_err2=0))
    for a in rep.rows:
        for b in rep.rows:
            if a.window <= b.window:
                assert b.weighted_error <= a.weighted_error
