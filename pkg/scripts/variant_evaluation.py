"""Score each feature-set variant against the all-params ground truth.

The window is picked by the sweep unless --window E,L (seconds) is given.
Several seeds are run and the per-variant metrics printed as a table.

    python3 scripts/variant_evaluation.py --seeds 3 --sessions 4000
"""

import argparse
import sys

from evflow.correlate import correlate
from evflow.evaluate import candidate_universe, establish_ground_truth, evaluate_variant
from evflow.model import TimeWindow, Variant
from evflow.normalize import filter_dataset, normalize_event, normalize_flow
from evflow.sweep import sweep_windows
from evflow.synth import SynthConfig, generate


def run_once(sessions, seed, window, collisions):
    cfg = SynthConfig(session_count=sessions, seed=seed, event_lag_ms="normal:-1500,900",
                      crawler_duplicate_rate=0.05, port_collision_rate=collisions,
                      sni_collision_rate=collisions)
    raw_events, raw_flows, _ = generate(cfg)
    events, flows, _ = filter_dataset([normalize_event(e) for e in raw_events],
                                      [normalize_flow(f) for f in raw_flows],
                                      Variant.ALL_PARAMS)
    if window is None:
        window = sweep_windows(events, flows).chosen
    gt = establish_ground_truth(events, flows, window)
    universe = candidate_universe(events, flows)
    return window, {v: evaluate_variant(gt, correlate(events, flows, v, window), universe)
                    for v in Variant}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sessions", type=int, default=4000)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--collisions", type=float, default=0.1)
    p.add_argument("--window", help="E,L in seconds (default: sweep)")
    args = p.parse_args(argv)
    window = None
    if args.window:
        e, l = (float(x) for x in args.window.split(","))
        window = TimeWindow.seconds(e, l)

    print(f"{'seed':>4} {'window':>8} {'variant':<12} {'accuracy':>9} {'precision':>9} "
          f"{'recall':>9} {'f1':>9} {'tp':>6} {'fp':>6} {'fn':>6}")
    for seed in range(args.seeds):
        chosen, metrics = run_once(args.sessions, seed, window, args.collisions)
        for v, m in metrics.items():
            print(f"{seed:>4} {str(chosen):>8} {v.value:<12} {m.accuracy:9.4f} {m.precision:9.4f} "
                  f"{m.recall:9.4f} {m.f1:9.4f} {m.tp:6d} {m.fp:6d} {m.fn:6d}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
