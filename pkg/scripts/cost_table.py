"""Per-level parameter/MAC breakdown of the fusion module at several input sizes.

    python scripts/cost_table.py --sizes 320 640 800
"""

import argparse
from collections import defaultdict

from icfusion.complexity import PUBLISHED_FULL_MODEL, report_fusion_config
from icfusion.config import FusionConfig, default_config, load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--sizes", type=int, nargs="+", default=[640])
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else default_config()

    for size in args.sizes:
        rep = report_fusion_config(FusionConfig(cfg.levels, size))
        by_stage = defaultdict(lambda: [0, 0])
        for layer in rep.layers:
            level, stage = layer.name.split(".")[:2]
            by_stage[(level, stage)][0] += layer.params
            by_stage[(level, stage)][1] += layer.macs
        print(f"input {size}x{size}")
        print(f"  {'level':<8}{'stage':<9}{'params (M)':>12}{'MACs (G)':>12}")
        for (level, stage), (p, m) in by_stage.items():
            print(f"  {level:<8}{stage:<9}{p / 1e6:>12.3f}{m / 1e9:>12.3f}")
        print(f"  {'total':<17}{rep.total_params / 1e6:>12.3f}{rep.total_macs / 1e9:>12.3f}")
    print(f"published full detector: {PUBLISHED_FULL_MODEL['params_m']} M params, "
          f"{PUBLISHED_FULL_MODEL['macs_g']} G MACs (backbones + encoder/decoder included)")


if __name__ == "__main__":
    main()
