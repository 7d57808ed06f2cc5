"""Command-line interface: ``ic-fusion <subcommand> ...``.

Exit codes: 0 success, 1 validation error (bad input, flags or files),
2 internal failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from icfusion import blocks, io, nn
from icfusion.complexity import report_fusion_config
from icfusion.config import FusionConfig, default_config, dump_config, load_config
from icfusion.gradcheck import format_results, run_gradcheck
from icfusion.selftest import run_selftest
from icfusion.tensor import ShapeError
from icfusion.wavelet import analyze_pair


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _load_cfg(path: str | None) -> FusionConfig:
    return load_config(path) if path else default_config()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_fuse(args) -> int:
    cfg = _load_cfg(args.config)
    ids = [lc.level for lc in cfg.levels]
    params = io.read_params(args.params, cfg) if args.params else blocks.init_params(cfg, args.seed)
    rgb = blocks.FeaturePyramid(io.read_pyramid(args.rgb_dir, ids), "rgb")
    ir = blocks.FeaturePyramid(io.read_pyramid(args.ir_dir, ids), "ir")
    for lc in cfg.levels:
        for pyr, width in ((rgb, lc.c_rgb), (ir, lc.c_ir)):
            got = pyr.levels[lc.level].shape[1]
            if got != width:
                raise ShapeError(f"{pyr.modality} level {lc.level}: channel mismatch on c: "
                                    f"expected {width}, got {got}")
    fused = blocks.pyramid_fuse(rgb, ir, params)
    io.write_pyramid(args.out, fused.levels)
    for level in sorted(fused.levels):
        shape = "x".join(str(d) for d in fused.levels[level].shape)
        print(f"level{level}.icft {shape}")
    return 0


def cmd_wavelet(args) -> int:
    rgb, ir = io.read_image(args.rgb), io.read_image(args.ir)
    results = analyze_pair(rgb, ir, args.levels)
    _emit(io.report_doc("wavelet", {"levels": args.levels, "wavelet": "haar-orthonormal",
                                    "luma": list(io.LUMA)}, results), args.out)
    return 0


def cmd_count(args) -> int:
    cfg = _load_cfg(args.config)
    if args.input_size:
        cfg = FusionConfig(cfg.levels, args.input_size)
    report = report_fusion_config(cfg).as_dict()
    config_text = report.pop("config")
    _emit(io.report_doc("count", {"config_text": config_text, "input_size": cfg.input_size},
                        report), args.out)
    return 0


def cmd_gradcheck(args) -> int:
    results = run_gradcheck(args.seed, args.coords)
    print(format_results(results))
    return 0 if all(r.passed for r in results) else 1


def cmd_selftest(args) -> int:
    with nn.num_threads(args.threads):
        results = run_selftest(args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def cmd_init_params(args) -> int:
    cfg = _load_cfg(args.config)
    written = io.write_params(args.out, blocks.init_params(cfg, args.seed))
    Path(args.out, "config.txt").write_text(dump_config(cfg))
    print(f"wrote {len(written)} tensor files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ic-fusion", description="Infrared-centric feature fusion toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("fuse", help="fuse RGB and IR feature pyramids")
    p.add_argument("rgb_dir", help="directory with level<l>.icft RGB features")
    p.add_argument("ir_dir", help="directory with level<l>.icft IR features")
    p.add_argument("--out", required=True, help="output directory for fused levels")
    p.add_argument("--config")
    p.add_argument("--params", help="parameter directory from init-params (default: seeded init)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("wavelet", help="Haar sub-band energy report for an RGB/IR image pair")
    p.add_argument("rgb")
    p.add_argument("ir")
    p.add_argument("--levels", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_wavelet)

    p = sub.add_parser("count", help="parameter and MAC report for a fusion config")
    p.add_argument("--config")
    p.add_argument("--input-size", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("gradcheck", help="finite-difference check of every block")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--coords", type=int, default=64)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("selftest", help="run the property checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("init-params", help="write seeded parameters as tensor files")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init_params)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        if getattr(args, "levels", 1) < 1:
            raise UsageError("--levels must be >= 1")
        with nn.num_threads(getattr(args, "threads", 1)):
            return args.func(args)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as err:
        print(f"ic-fusion: error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001
        print(f"ic-fusion: internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
