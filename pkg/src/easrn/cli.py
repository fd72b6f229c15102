"""Command-line front-end.

Verbs:
  gen     synthesize blurred/sharp pairs (or replay a manifest)
  deblur  restore images with a weight file
  eval    score restored images against ground truth

Exit codes: 0 success, 1 partial item failures, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .network import GraphConfig
from .pipeline import DatasetPolicy, evaluate_pairs, generate_dataset, replay_manifest, run_deblur
from .validation import ConfigurationError

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="easrn", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="synthesize blurred/sharp image pairs")
    gen.add_argument("--input-dir", help="directory of sharp source images")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--count", type=int, default=None,
                     help="number of pairs (default: one per input image)")
    gen.add_argument("--oe-fraction", type=float, default=1.0 / 3.0,
                     help="fraction of images that get light streaks")
    gen.add_argument("--max-shift", type=float, default=30.0)
    gen.add_argument("--sigma-max", type=float, default=0.02)
    gen.add_argument("--crop", type=int, default=512)
    gen.add_argument("--scales", type=int, default=3)
    gen.add_argument("--bits", type=int, default=16, choices=(8, 16))
    gen.add_argument("--rotation", type=float, default=0.0,
                     help="in-plane roll per trajectory sample, degrees")
    gen.add_argument("--jobs", type=int, default=1)
    gen.add_argument("--no-flips", action="store_true")
    gen.add_argument("--no-gamma", action="store_true")
    gen.add_argument("--resume", action="store_true",
                     help="skip items already completed in a partial manifest")
    gen.add_argument("--replay", metavar="MANIFEST",
                     help="regenerate pairs from an existing manifest and verify checksums")

    deb = sub.add_parser("deblur", help="restore images with a weight file")
    deb.add_argument("--weights", required=True)
    deb.add_argument("--input", required=True, help="image file or directory")
    deb.add_argument("--output", required=True, help="output file or directory")
    deb.add_argument("--scales", type=int, default=3)
    deb.add_argument("--base-channels", type=int, default=4)
    deb.add_argument("--dump-intermediates", action="store_true",
                     help="also write every scale's input and output")

    ev = sub.add_parser("eval", help="PSNR/SSIM over matched image pairs")
    ev.add_argument("--pred-dir", required=True)
    ev.add_argument("--gt-dir", required=True)
    ev.add_argument("--report", help="write the JSON report here")
    return parser


def _cmd_gen(args) -> int:
    if args.replay:
        result = replay_manifest(args.replay, args.out_dir)
        print(f"replayed {result.ok} pairs, {result.failed} failed -> {result.manifest_path}")
        return result.exit_code
    if not args.input_dir:
        raise ConfigurationError("gen needs --input-dir (or --replay)")
    inputs = [p for p in sorted(Path(args.input_dir).iterdir())
              if p.suffix.lower() in IMAGE_SUFFIXES]
    policy = DatasetPolicy(
        crop_size=args.crop, flips=not args.no_flips, gamma=not args.no_gamma,
        oe_fraction=args.oe_fraction, max_shift=args.max_shift, sigma_max=args.sigma_max,
        rotation_per_sample=args.rotation, scales=args.scales, bits=args.bits, seed=args.seed)
    result = generate_dataset(inputs, args.out_dir, policy, count=args.count,
                              jobs=args.jobs, resume=args.resume)
    print(f"generated {result.ok} pairs, {result.failed} failed -> {result.manifest_path}")
    return result.exit_code


def _cmd_deblur(args) -> int:
    config = GraphConfig(base_channels=args.base_channels, n_scales=args.scales)
    written = run_deblur(args.input, args.weights, args.output, config,
                         dump_intermediates=args.dump_intermediates)
    print(f"wrote {len(written)} file(s), final output {written[0]}")
    return 0


def _cmd_eval(args) -> int:
    report = evaluate_pairs(args.pred_dir, args.gt_dir, args.report)
    mean_psnr = "inf-only" if report["mean_psnr"] is None else f"{report['mean_psnr']:.2f} dB"
    print(f"{report['count']} pairs: mean PSNR {mean_psnr}, mean SSIM {report['mean_ssim']:.4f}")
    if not args.report:
        print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "deblur":
            return _cmd_deblur(args)
        return _cmd_eval(args)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
