#!/usr/bin/env python3
"""Oracle-equivalence matrix: every engine/LP/seed/GAIA combination vs the sequential trace."""

import argparse
import sys
import time

from adaptsim.experiments import ENGINES, MATRIX_MODELS, oracle_matrix


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--models", nargs="+", default=list(MATRIX_MODELS), choices=list(MATRIX_MODELS))
    ap.add_argument("--engines", nargs="+", default=list(ENGINES), choices=list(ENGINES))
    ap.add_argument("--lps", nargs="+", type=int, default=[1, 2, 4, 8])
    ap.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    ap.add_argument("--gaia", choices=["off", "on", "both"], default="both")
    args = ap.parse_args()
    gaia = {"off": (False,), "on": (True,), "both": (False, True)}[args.gaia]
    models = {m: MATRIX_MODELS[m] for m in args.models}
    t0 = time.perf_counter()
    rows = bad = 0
    for row in oracle_matrix(models, args.engines, args.lps, args.seeds, gaia):
        rows += 1
        bad += not row.identical
        print(row.line(), flush=True)
    print(f"{rows - bad}/{rows} identical in {time.perf_counter() - t0:.1f}s")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
