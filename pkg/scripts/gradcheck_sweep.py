"""Gradient check over many seeds, reporting both error measures per block.

The relative error (the pass criterion) spikes whenever a sampled coordinate
has a near-zero gradient, since the O(h^2) truncation error of central
differences does not shrink with it. The scaled error shows whether any such
spike is a real mismatch.

    python scripts/gradcheck_sweep.py --seeds 50
"""

import argparse
from collections import defaultdict

from icfusion.gradcheck import TOLERANCE, run_gradcheck


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--coords", type=int, default=64)
    args = ap.parse_args()

    rel, scaled, fails = defaultdict(list), defaultdict(list), defaultdict(int)
    for seed in range(args.seeds):
        for r in run_gradcheck(seed, args.coords):
            rel[r.block].append(r.max_rel_error)
            scaled[r.block].append(r.max_scaled_error)
            fails[r.block] += not r.passed
    print(f"{'block':<14}{'worst rel':>12}{'worst scaled':>14}{'seeds > tol':>13}")
    for block in rel:
        print(f"{block:<14}{max(rel[block]):>12.2e}{max(scaled[block]):>14.2e}"
              f"{fails[block]:>8d}/{args.seeds}")
    print(f"tolerance {TOLERANCE:g}")


if __name__ == "__main__":
    main()
