"""Command-line entry point: prepare-data, train, infer, evaluate, compare.

Every subcommand accepts --config (YAML run config), --seed (overrides the
seed in every config section) and --verbose. Exit status is 0 only when all
declared outputs were written; domain errors print a one-line message and
exit 1.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import load_config, snapshot_config, validate_all
from .data_pipeline import build_dataset, load_manifest
from .errors import MrisrError, TrainingDivergedError
from .evaluator import evaluate_split, format_table, make_montage, write_reports
from .imageio import load_gray, save_png16
from .losses import FeatureExtractor
from .trainer import infer as run_inference
from .trainer import train as run_training

log = logging.getLogger("mrisr")


def _find_volumes(input_dir: Path) -> list:
    paths = [p for p in input_dir.rglob("*") if p.name.endswith((".nii", ".nii.gz"))]
    return sorted(paths)


def cmd_prepare_data(args) -> int:
    cfg = _load_run_config(args)
    input_dir = Path(args.input_dir)
    if not input_dir.is_dir():
        raise MrisrError(f"input directory not found: {input_dir}")
    volumes = _find_volumes(input_dir)
    if not volumes:
        raise MrisrError(f"no volumes found under {input_dir}")
    if args.split_fraction is not None:
        cfg.data.split_fraction = args.split_fraction
    manifest = build_dataset(
        volumes,
        args.output_dir,
        seed=cfg.data.seed,
        split_fraction=cfg.data.split_fraction,
        scale=cfg.data.scale,
        pad_to=cfg.data.pad_to,
        blank_rule=cfg.data.blank_rule,
        grade_override=cfg.data.grade_override,
        workers=cfg.data.workers,
    )
    c = manifest.counts
    print(f"volumes: {c['volumes']} (train {c['train_volumes']} / test {c['test_volumes']})")
    print(f"slices included: {c['included']} (train {c['train_slices']} / test {c['test_slices']})")
    print(f"slices excluded: {c['excluded']}")
    print(f"manifest: {Path(args.output_dir) / 'manifest.json'}")
    return 0


def _build_extractor(cfg) -> FeatureExtractor | None:
    if cfg.train.perceptual_weight <= 0:
        return None
    extractor = FeatureExtractor(arch=cfg.perceptual.arch, weights_path=cfg.perceptual.weights_path)
    if extractor.weights_sha256:
        log.info("perceptual backbone %s, weights sha256 %s", extractor.arch, extractor.weights_sha256)
    return extractor


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    validate_all(cfg)
    run_dir = Path(args.run_dir)
    extractor = _build_extractor(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    snapshot_config(cfg, run_dir / "config.json")
    try:
        final = run_training(
            cfg.train,
            cfg.generator,
            cfg.discriminator,
            args.data_dir,
            run_dir,
            extractor=extractor,
            resume=args.resume,
        )
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc} | snapshot: {exc.snapshot}", file=sys.stderr)
        return 1
    print(f"final checkpoint: {final}")
    print(f"loss log: {run_dir / 'loss_log.csv'}")
    return 0


def cmd_infer(args) -> int:
    lr_image = load_gray(args.input_image)
    sr = run_inference(args.checkpoint, lr_image)
    save_png16(args.output_image, sr[0])
    print(f"wrote {args.output_image} ({sr.shape[1]}x{sr.shape[2]})")
    return 0


def cmd_evaluate(args) -> int:
    reports = evaluate_split(args.data_dir, args.checkpoint, split=args.split, limit=args.limit)
    paths = write_reports(reports, args.out_dir)
    print(format_table(reports))
    print(f"summary: {paths['summary']}")
    return 0


def cmd_compare(args) -> int:
    montage = make_montage(args.data_dir, args.checkpoint, args.ids)
    save_png16(args.out_path, montage)
    print(f"wrote {args.out_path} ({montage.shape[0]}x{montage.shape[1]}, {len(args.ids)} rows)")
    return 0


def _load_run_config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.set_seed(args.seed)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config file")
    common.add_argument("--seed", type=int, help="override the seed in every config section")
    common.add_argument("--verbose", action="store_true", help="debug-level logging")

    parser = argparse.ArgumentParser(
        prog="mrisr",
        description="Grayscale MR-slice x4 super-resolution: data prep, GAN training, "
        "inference, and metric evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", parents=[common],
                       help="slice NIfTI volumes into normalized HR/LR training pairs")
    p.add_argument("input_dir", help="directory scanned recursively for .nii/.nii.gz volumes")
    p.add_argument("output_dir", help="destination for slice pairs and manifest.json")
    p.add_argument("--split-fraction", type=float, help="train fraction of volumes")
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train", parents=[common], help="train the generator/discriminator pair")
    p.add_argument("data_dir", help="prepared dataset directory (with manifest.json)")
    p.add_argument("run_dir", help="output directory for checkpoints, logs, config snapshot")
    p.add_argument("--resume", action="store_true", help="continue from the latest checkpoint in run_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[common], help="upscale one grayscale image x4")
    p.add_argument("checkpoint", help="trained checkpoint (.pt)")
    p.add_argument("input_image", help="grayscale PNG (8- or 16-bit)")
    p.add_argument("output_image", help="output 16-bit grayscale PNG")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score baselines (and optionally a checkpoint) on a split")
    p.add_argument("data_dir", help="prepared dataset directory")
    p.add_argument("out_dir", help="destination for metrics_<method>.csv and summary.json")
    p.add_argument("--checkpoint", help="trained checkpoint; omit for baselines only")
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--limit", type=int, help="evaluate only the first N slice pairs")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", parents=[common],
                       help="montage of GT | LR | model | bilinear | bicubic per image id")
    p.add_argument("data_dir", help="prepared dataset directory")
    p.add_argument("checkpoint", help="trained checkpoint (.pt)")
    p.add_argument("out_path", help="output 16-bit grayscale PNG")
    p.add_argument("--ids", nargs="+", required=True,
                   help="slice ids like SUBJECT_042 (see manifest included_slices)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except MrisrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
