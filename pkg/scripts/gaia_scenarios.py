#!/usr/bin/env python3
"""Clustering, load balancing and consolidation, GAIA off vs on, on every engine."""

import argparse

from adaptsim.experiments import ENGINES, balancing, clustering, consolidation_rounds


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    ap.add_argument("--engines", nargs="+", default=list(ENGINES), choices=list(ENGINES))
    args = ap.parse_args()
    print("clustering: remote share of messages in the final quarter, two split cliques")
    for e in args.engines:
        for s in args.seeds:
            print(f"  {e:11s} seed {s}: off {clustering(e, s, False):.3f}  on {clustering(e, s, True):.3f}")
    print("load balancing: wct with LP3 under 2x background load")
    for e in args.engines:
        for s in args.seeds:
            print(f"  {e:11s} seed {s}: off {balancing(e, s, False):.3f}s  on {balancing(e, s, True):.3f}s")
    print("consolidation: round by which 16 mutual entities share one LP")
    for e in args.engines:
        print(f"  {e:11s} " + "  ".join(str(consolidation_rounds(e, s)) for s in args.seeds))


if __name__ == "__main__":
    main()
