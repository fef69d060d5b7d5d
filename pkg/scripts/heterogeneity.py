#!/usr/bin/env python3
"""Time Warp waste as one LP gets slower, and its sensitivity to the snapshot interval."""

import argparse

from adaptsim.experiments import GOSSIP, run_case, sequential
from adaptsim.metrics import efficiency
from adaptsim.runtime import EnvProfile
from adaptsim.sync import EngineOptions


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--factors", nargs="+", type=float, default=[1, 2, 3, 4],
                    help="slowdowns of the last LP; without throttling, gossip thrashes beyond about 4")
    ap.add_argument("--snapshots", nargs="+", type=int, default=[1, 4, 16, 32])
    args = ap.parse_args()
    ref = sequential("gossip", GOSSIP, 200, args.seed).trace_text()
    print("slowdown  rollbacks  efficiency  wct      identical")
    for f in args.factors:
        prof = EnvProfile([1000.0, 1000.0, 1000.0, 1000.0 / f])
        r = run_case("timewarp", "gossip", GOSSIP, 200, 4, args.seed, profile=prof)
        c = r.report.counters
        print(f"{f:8g}  {c.rollbacks:9d}  {efficiency(r.report):10.3f}  {r.report.wct:7.3f}  {r.trace_text() == ref}")
    print()
    print("snapshot_every  processed  wct      identical   (one LP 4x slower)")
    prof = EnvProfile([1000.0, 1000.0, 1000.0, 250.0])
    for k in args.snapshots:
        r = run_case("timewarp", "gossip", GOSSIP, 200, 4, args.seed, profile=prof,
                     options=EngineOptions(snapshot_every=k))
        print(f"{k:14d}  {r.report.total_processed:9d}  {r.report.wct:7.3f}  {r.trace_text() == ref}")


if __name__ == "__main__":
    main()
