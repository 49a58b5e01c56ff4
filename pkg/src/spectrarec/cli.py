"""Command-line interface: ``spectrarec <command> ...``.

Exit codes: 0 success, 1 failed self-check, 2 usage or configuration error.
"""
from __future__ import annotations

from . import _threads  # first: caps BLAS threads before numpy loads

import argparse
import dataclasses
import os
import sys

import numpy as np

from ._io import atomic_write, parse_kv, write_csv
from .check import run_checks
from .cube import boxcar_response, extract_spectrum, load_cube, load_rgb
from .dataset import load_dataset, rgb_filename, save_dataset
from .errors import SpectraRecError
from .metrics import aggregate_reports, evaluate_image
from .nn import MODELS, build_model, forward, load_checkpoint, save_checkpoint
from .report import (
    CHANNELS_CSV,
    CHART_SVG,
    METRICS_CSV,
    RANGES_CSV,
    format_summary,
    read_channels_csv,
    read_metrics_csv,
    read_ranges_csv,
    render_chart,
    write_report,
)
from .synth import generation_config, make_dataset
from .train import AugmentConfig, TrainConfig, fine_tune, load_train_config, train_model, write_history_csv


class UsageError(Exception):
    pass


def _read_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_kv(fh.read())


def _train_config(args):
    cfg = load_train_config(args.config) if args.config else TrainConfig()
    overrides = {}
    for name in ("epochs", "seed", "loss", "lr0", "fine_tune_epochs"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "augment", False) and cfg.augment is None:
        overrides["augment"] = AugmentConfig()
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _history_path(args):
    if args.history:
        return args.history
    stem, _ = os.path.splitext(args.out)
    return stem + "_history.csv"


def _print_epoch(record):
    print(f"{record.epoch} {record.train_loss!r} {record.val_loss!r} {record.lr!r}", flush=True)


# -- commands -----------------------------------------------------------------

def cmd_gen(args):
    gen = generation_config(_read_config(args.config))
    response = boxcar_response(gen.scene.wavelengths)
    ds = make_dataset(gen.scene_count, gen.scene, response, gen.splits)
    save_dataset(ds, args.out)
    print(f"train {len(ds.train)} val {len(ds.val)} test {len(ds.test)}")
    return 0


def cmd_train(args):
    cfg = _train_config(args)
    ds = load_dataset(args.data, splits=("train", "val"))
    spec = build_model(args.model, ds.channels)
    print("epoch train_loss val_loss lr", flush=True)
    weights, history = train_model(spec, ds, cfg, on_epoch=_print_epoch)
    save_checkpoint(spec, weights, args.out)
    write_history_csv(history, _history_path(args))
    print(f"best epoch {history.best_epoch} val_loss {history.best_val_loss!r} ({history.loss} loss)")
    return 0


def cmd_finetune(args):
    cfg = _train_config(args)
    spec, pretrained = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data, splits=("train", "val"))
    print("epoch train_loss val_loss lr", flush=True)
    new_spec, weights, history = fine_tune(spec, pretrained, ds, cfg, on_epoch=_print_epoch)
    save_checkpoint(new_spec, weights, args.out)
    write_history_csv(history, _history_path(args))
    print(f"best epoch {history.best_epoch} val_loss {history.best_val_loss!r}")
    return 0


def cmd_eval(args):
    spec, weights = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data, splits=(args.split,))
    samples = ds.split(args.split)
    if not samples:
        raise UsageError(f"split {args.split!r} is empty")
    if spec.output_channels != ds.channels:
        raise UsageError(
            f"checkpoint predicts {spec.output_channels} channels but the dataset has {ds.channels}; "
            f"adapt it first with `spectrarec finetune`"
        )
    per_image = [evaluate_image(s.cube, s.cube.with_data(forward(spec, weights, s.rgb))) for s in samples]
    report = aggregate_reports(per_image, ds.wavelengths)
    write_report(report, args.out)
    print(format_summary(report.metrics, {k: (report.range_channels[k], *v) for k, v in report.per_range.items()}))
    return 0


def cmd_report(args):
    d = args.report_dir
    metrics = read_metrics_csv(os.path.join(d, METRICS_CSV))
    ranges = read_ranges_csv(os.path.join(d, RANGES_CSV))
    channels = read_channels_csv(os.path.join(d, CHANNELS_CSV))
    with atomic_write(os.path.join(d, CHART_SVG), "w") as fh:
        fh.write(render_chart(channels["wavelength_nm"], channels["mae_mean"], channels["psnr_mean"]))
    print(format_summary(metrics, ranges))
    return 0


def _parse_point(text):
    try:
        h, w = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"point must be 'h,w', got {text!r}") from None
    return h, w


def cmd_spectra(args):
    spec, weights = load_checkpoint(args.checkpoint)
    cube = load_cube(args.cube)
    rgb = load_rgb(args.rgb or rgb_filename(args.cube))
    if spec.output_channels != cube.channels:
        raise UsageError(f"checkpoint predicts {spec.output_channels} channels, cube has {cube.channels}")
    for h, w in args.point:
        if not (0 <= h < cube.height and 0 <= w < cube.width):
            raise UsageError(f"point {h},{w} outside the {cube.height}x{cube.width} image")
    pred = forward(spec, weights, rgb)
    os.makedirs(args.out, exist_ok=True)
    for h, w in args.point:
        label = extract_spectrum(cube, h, w)
        rows = zip(cube.wavelengths.tolist(), label.tolist(), pred[h, w].astype(np.float64).tolist())
        path = os.path.join(args.out, f"spectrum_{h}_{w}.csv")
        write_csv(path, ["wavelength_nm", "label", "prediction"], rows)
        print(path)
    return 0


def cmd_check(args):
    results = run_checks(sys.stdout)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return 1
    print(f"all {len(results)} checks passed")
    return 0


# -- parser -------------------------------------------------------------------

def _add_train_flags(p, fine=False):
    p.add_argument("--data", required=True, help="dataset directory containing manifest.csv")
    p.add_argument("--out", required=True, help="output checkpoint path (HSW1)")
    p.add_argument("--config", help="training config file (flat key = value, TrainConfig field names)")
    p.add_argument("--history", help="history CSV path (default: <out stem>_history.csv)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--loss", choices=("l1", "mrae", "auto"), help="override the config loss")
    p.add_argument("--lr0", type=float, help="override the initial learning rate")
    p.add_argument("--augment", action="store_true", help="enable geometric augmentation with default settings")
    if fine:
        p.add_argument("--epochs", dest="fine_tune_epochs", type=int, help="fine-tune epochs (1 to 50)")
    else:
        p.add_argument("--epochs", type=int, help="override the number of epochs")


def build_parser():
    parser = argparse.ArgumentParser(prog="spectrarec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("gen", help="generate a synthetic paired dataset")
    p.add_argument("config", help="scene config file (flat key = value)")
    p.add_argument("out", help="output dataset directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model on a dataset")
    p.add_argument("--model", required=True, choices=sorted(MODELS), help="network architecture")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune", help="replace the head and fine-tune on a new dataset")
    p.add_argument("--checkpoint", required=True, help="pretrained checkpoint (HSW1)")
    _add_train_flags(p, fine=True)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", help="evaluate a checkpoint and write report CSVs and a chart")
    p.add_argument("--checkpoint", required=True, help="checkpoint (HSW1)")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--split", default="test", choices=("train", "val", "test"), help="split to evaluate")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="print a report directory and redraw its chart")
    p.add_argument("report_dir", help="directory written by eval")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("spectra", help="export label and predicted spectra at pixels")
    p.add_argument("--checkpoint", required=True, help="checkpoint (HSW1)")
    p.add_argument("--cube", required=True, help="label cube (HSC1)")
    p.add_argument("--rgb", help="RGB input (default: the cube's paired _rgb file)")
    p.add_argument("--point", required=True, action="append", type=_parse_point,
                   help="pixel as h,w; repeat for several points")
    p.add_argument("--out", required=True, help="output directory for the CSVs")
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("check", help="run the built-in verification suite")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if _threads.ERROR:
        print(f"error: {_threads.ERROR}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (UsageError, SpectraRecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
