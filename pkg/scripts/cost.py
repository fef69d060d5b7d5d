#!/usr/bin/env python3
"""Pay-per-use cost of the same run on each engine, split into compute, messages and rental."""

import argparse

from adaptsim.experiments import ENGINES, GOSSIP, cost_pair, run_case
from adaptsim.metrics import PricingScheme


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lps", type=int, default=4)
    ap.add_argument("--cpu", type=float, default=0.5, help="price per busy LP-second")
    ap.add_argument("--msg", type=float, default=0.001, help="price per channel message")
    ap.add_argument("--rent", type=float, default=0.1, help="price per allocated LP-second")
    args = ap.parse_args()
    pricing = PricingScheme(args.cpu, args.msg, args.rent)
    print("engine       wct      compute    messages   rental     total")
    for e in ("sequential",) + ENGINES:
        L = 1 if e == "sequential" else args.lps
        rep = run_case(e, "gossip", GOSSIP, 200, L, args.seed, pricing=pricing).report
        b = rep.cost_breakdown()
        print(f"{e:11s}  {rep.wct:7.3f}  {float(b.compute):9.4f}  {float(b.communication):9.4f}  "
              f"{float(b.rental):9.4f}  {float(b.total):9.4f}")
    pair = cost_pair(args.seed, PricingScheme(args.cpu, args.msg))
    print(f"\ncmb - timestepped (no rental): {pair.delta} = {pair.cmb.counters.null_messages} nulls x {args.msg}: "
          f"{pair.delta == pair.null_cost}")


if __name__ == "__main__":
    main()
