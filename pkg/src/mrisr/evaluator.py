"""Test-split evaluation: SSIM/NRMSE/MAE/VIF for baselines and the model.

For every test slice pair the LR image is upscaled x4 by bilinear and
bicubic interpolation and, when a checkpoint is given, by the trained
generator; each reconstruction is scored against the HR slice with all
four metrics. One MetricsReport per method collects the per-image rows and
a mean +/- population-std aggregate, mirroring the usual method-by-metric
summary table layout.

Report files: ``metrics_<method>.csv`` (one row per image) and
``summary.json`` (aggregates as both raw numbers and "mean±std" strings).
The comparison montage stacks, per image id, the panels
ground truth | LR (nearest-upscaled for display) | model | bilinear | bicubic
left to right into one row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_pipeline import load_manifest, load_pair
from .errors import ConfigError, MrisrError
from .metrics import mae, nrmse, ssim, vif
from .resample import upscale4
from .trainer import apply_generator, load_generator

METRIC_NAMES = ("ssim", "nrmse", "mae", "vif")
BASELINE_METHODS = ("bilinear", "bicubic")
SUMMARY_NAME = "summary.json"


@dataclass
class MetricsReport:
    method: str
    per_image: list
    aggregate: dict

    @classmethod
    def from_rows(cls, method: str, per_image: list) -> "MetricsReport":
        aggregate = {}
        for name in METRIC_NAMES:
            values = np.array([row[name] for row in per_image], dtype=np.float64)
            aggregate[name] = (float(values.mean()), float(values.std()))
        return cls(method=method, per_image=per_image, aggregate=aggregate)


def baseline_upscale(lr: np.ndarray, method: str) -> np.ndarray:
    """x4 upscale with the named interpolation kernel, clamped to [0,1]."""
    if method not in BASELINE_METHODS:
        raise ConfigError(f"unsupported upscale method {method!r}; use one of {BASELINE_METHODS}")
    return upscale4(lr, method)


def score_pair(hr: np.ndarray, reconstruction: np.ndarray, image_id: str) -> dict:
    return {
        "image_id": image_id,
        "ssim": ssim(hr, reconstruction),
        "nrmse": nrmse(hr, reconstruction),
        "mae": mae(hr, reconstruction),
        "vif": vif(hr, reconstruction),
    }


def evaluate_split(data_dir, checkpoint=None, *, split: str = "test", limit: int | None = None) -> list:
    """Score every slice pair in the split; returns one report per method."""
    data_dir = Path(data_dir)
    manifest = load_manifest(data_dir)
    keys = manifest.slices_for_split(split)
    if limit is not None:
        keys = keys[:limit]
    if not keys:
        raise MrisrError(f"manifest has no slices in split {split!r}")

    generator = load_generator(checkpoint) if checkpoint is not None else None
    methods = list(BASELINE_METHODS) + (["model"] if generator is not None else [])
    rows = {method: [] for method in methods}
    for vid, idx in keys:
        pair = load_pair(data_dir, vid, idx)
        hr = pair.hr.astype(np.float64)
        recons = {m: baseline_upscale(pair.lr, m) for m in BASELINE_METHODS}
        if generator is not None:
            recons["model"] = apply_generator(generator, pair.lr)[0]
        for method in methods:
            rows[method].append(score_pair(hr, recons[method], pair.key))
    return [MetricsReport.from_rows(method, rows[method]) for method in methods]


def _display(mean: float, std: float) -> str:
    return f"{mean:.4f}±{std:.4f}"


def write_reports(reports: list, out_dir) -> dict:
    """Write metrics_<method>.csv per report plus summary.json; return paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    summary = {"n_images": len(reports[0].per_image) if reports else 0, "methods": {}}
    for report in reports:
        csv_path = out_dir / f"metrics_{report.method}.csv"
        lines = ["image_id," + ",".join(METRIC_NAMES)]
        for row in report.per_image:
            lines.append(row["image_id"] + "," + ",".join(repr(float(row[m])) for m in METRIC_NAMES))
        csv_path.write_text("\n".join(lines) + "\n")
        paths[report.method] = csv_path
        summary["methods"][report.method] = {
            name: {
                "mean": report.aggregate[name][0],
                "std": report.aggregate[name][1],
                "display": _display(*report.aggregate[name]),
            }
            for name in METRIC_NAMES
        }
    summary_path = out_dir / SUMMARY_NAME
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    paths["summary"] = summary_path
    return paths


def format_table(reports: list) -> str:
    """Fixed-width method-by-metric table with mean±std cells."""
    header = ["method"] + [name.upper() for name in METRIC_NAMES]
    body = [
        [report.method] + [_display(*report.aggregate[name]) for name in METRIC_NAMES]
        for report in reports
    ]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), fmt.format(*["-" * w for w in widths])]
    lines += [fmt.format(*row) for row in body]
    return "\n".join(lines)


def nearest_upscale4(lr: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(lr, 4, axis=0), 4, axis=1)


def make_montage(data_dir, checkpoint, image_ids: list) -> np.ndarray:
    """One row per image id: GT | LR (nearest x4) | model | bilinear | bicubic."""
    data_dir = Path(data_dir)
    manifest = load_manifest(data_dir)
    included = {(vid, idx) for vid, idx in manifest.included_slices}
    generator = load_generator(checkpoint)
    rows = []
    for image_id in image_ids:
        vid, _, idx_text = image_id.rpartition("_")
        if not vid or not idx_text.isdigit() or (vid, int(idx_text)) not in included:
            raise MrisrError(f"unknown image id {image_id!r}")
        pair = load_pair(data_dir, vid, int(idx_text))
        panels = [
            pair.hr.astype(np.float64),
            nearest_upscale4(pair.lr).astype(np.float64),
            apply_generator(generator, pair.lr)[0].astype(np.float64),
            baseline_upscale(pair.lr, "bilinear"),
            baseline_upscale(pair.lr, "bicubic"),
        ]
        rows.append(np.concatenate(panels, axis=1))
    return np.concatenate(rows, axis=0)
