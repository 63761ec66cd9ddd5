"""Command-line entry points.

Verbs: gen-data, train-sensing, train-link, train-codec, eval, report. All
configuration lives in one sectioned key-value file; --seed and --out-dir
override it.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..pgm import write_pgm
from ..reconstruction import psnr
from ..sensor import NoiseConfig, capture
from ..rng import stream
from ..video import make_dataset
from .config import load_config
from .experiments import (
    load_sensing,
    run_compression_baselines,
    run_fixed_ratio_baseline,
    train_link,
    train_sensing,
)
from .report import emit_report, read_report_csv


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="experiment config file")
    sub.add_argument("--seed", type=int, default=None, help="override config seed")
    sub.add_argument("--out-dir", default=None, help="override output directory")


def _cfg(args):
    return load_config(args.config, seed=args.seed, out_dir=args.out_dir)


def cmd_gen_data(args) -> int:
    cfg = _cfg(args)
    out = Path(cfg.out_dir)
    train, test = make_dataset(cfg.n_train, cfg.n_test, cfg.height, cfg.width,
                               cfg.frames, kind=cfg.scene_kind,
                               velocity=cfg.velocity, seed=cfg.seed)
    for name, clips in (("train_frames", train), ("test_frames", test)):
        frame_dir = out / name
        frame_dir.mkdir(parents=True, exist_ok=True)
        n = 0
        for clip in clips:
            for t in range(clip.frames):
                write_pgm(frame_dir / f"frame_{n:06d}.pgm", clip.data[:, :, t])
                n += 1
        print(f"{frame_dir}: {n} frames ({len(clips)} clips of {cfg.frames})")
    return 0


def cmd_train_sensing(args) -> int:
    cfg = _cfg(args)
    if cfg.mode == "sensing-fixed-ratio":
        record = run_fixed_ratio_baseline(cfg)
    else:
        record = train_sensing(cfg)
    paths = emit_report([record], cfg.out_dir)
    for row in record.rows:
        print(f"{row.x_metric}={row.x:.4f}  psnr={row.psnr_mean:.2f}±{row.psnr_std:.2f} dB")
    print(f"report: {paths['csv']}")
    return 0


def cmd_train_link(args) -> int:
    cfg = _cfg(args)
    record = train_link(cfg, args.sensing_checkpoint)
    paths = emit_report([record], cfg.out_dir)
    for row in record.rows:
        print(f"l_avg={row.x:.1f}  psnr={row.psnr_mean:.2f}±{row.psnr_std:.2f} dB")
    print(f"report: {paths['csv']}")
    return 0


def cmd_train_codec(args) -> int:
    cfg = _cfg(args)
    record = run_compression_baselines(cfg, args.sensing_checkpoint)
    paths = emit_report([record], cfg.out_dir)
    for row in record.rows:
        print(f"l_avg={row.x:.1f}  psnr={row.psnr_mean:.2f}±{row.psnr_std:.2f} dB")
    print(f"report: {paths['csv']}")
    return 0


def cmd_eval(args) -> int:
    cfg = _cfg(args)
    sensing = load_sensing(args.checkpoint)
    _, test = make_dataset(cfg.n_train, cfg.n_test, cfg.height, cfg.width,
                           cfg.frames, kind=cfg.scene_kind,
                           velocity=cfg.velocity, seed=cfg.seed)
    from ..reconstruction import initial_reconstruction, refine

    values = []
    for i, clip in enumerate(test):
        data = capture(clip, sensing["ratio_map"], sensing["aperture"],
                       NoiseConfig(), stream("eval-noise", cfg.seed, "cli", i))
        v0 = initial_reconstruction(data, None, sensing["aperture"])
        out = refine(v0, sensing["ratio_map"], sensing["pipe"], sensing["aperture"])
        values.append(psnr(clip.data, out.data.transpose(1, 2, 0)))
    print(f"r_avg={sensing['ratio_map'].r_avg:.4f}  "
          f"psnr={np.mean(values):.2f}±{np.std(values):.2f} dB  "
          f"({len(values)} test clips)")
    return 0


def cmd_report(args) -> int:
    records = []
    for path in args.inputs:
        records.extend(read_report_csv(path))
    paths = emit_report(records, args.out_dir)
    print(f"merged {len(records)} records -> {paths['svg']}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="varisense",
        description="Spatially-variant video compressed sensing and its semantic link")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("gen-data", help="write synthetic scenes as graymap frames")
    _add_common(sub)
    sub.set_defaults(fn=cmd_gen_data)

    sub = subs.add_parser("train-sensing", help="train reconstruction (+ ratio policy)")
    _add_common(sub)
    sub.set_defaults(fn=cmd_train_sensing)

    sub = subs.add_parser("train-link", help="train the semantic link on a sensing checkpoint")
    _add_common(sub)
    sub.add_argument("--sensing-checkpoint", required=True)
    sub.set_defaults(fn=cmd_train_link)

    sub = subs.add_parser("train-codec", help="train task-aware compression baselines")
    _add_common(sub)
    sub.add_argument("--sensing-checkpoint", required=True)
    sub.set_defaults(fn=cmd_train_codec)

    sub = subs.add_parser("eval", help="evaluate a sensing checkpoint on the test split")
    _add_common(sub)
    sub.add_argument("--checkpoint", required=True)
    sub.set_defaults(fn=cmd_eval)

    sub = subs.add_parser("report", help="merge report CSVs into one chart")
    sub.add_argument("--inputs", nargs="+", required=True)
    sub.add_argument("--out-dir", required=True)
    sub.set_defaults(fn=cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
