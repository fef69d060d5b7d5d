#!/usr/bin/env python3
"""Crash one LP halfway through a time-stepped run with 1, 2 and 3 replicas per entity."""

import argparse

from adaptsim.experiments import GOSSIP, run_case
from adaptsim.runtime import CrashSpec, EnvProfile


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--crash-lp", type=int, default=1)
    ap.add_argument("--re-replication", action="store_true")
    args = ap.parse_args()
    base = run_case("timestepped", "gossip", GOSSIP, 200, 4, args.seed)
    at = base.report.wct / 2
    msgs = base.report.counters.channel_messages
    print(f"crash-free r=1: wct {base.report.wct:.3f}s, {msgs} channel messages; crash at {at:.3f}s")
    for r in (1, 2, 3):
        prof = EnvProfile([1000.0] * 4, crashes=[CrashSpec(args.crash_lp, at)])
        res = run_case("timestepped", "gossip", GOSSIP, 200, 4, args.seed, replicas=r,
                       re_replication=args.re_replication, profile=prof)
        rep = res.report
        same = res.trace_text() == base.trace_text()
        print(f"r={r}: status {rep.status:6s} identical {same!s:5s} messages x{rep.counters.channel_messages / msgs:.3f} "
              f"dedup drops {rep.counters.dedup_drops} wct {rep.wct:.3f}s {rep.failure}")


if __name__ == "__main__":
    main()
