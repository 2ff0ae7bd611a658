"""Turn 3-D MR volumes into paired HR/LR 2-D slice datasets.

The pipeline, per volume: ingest NIfTI -> drop blank slices (all raw
voxels zero) -> min-max normalize the whole volume to [0, 1] -> zero-pad
each kept slice to 256x256 -> produce the 64x64 LR counterpart by
antialiased x4 bilinear downsampling -> store both as float32 ``.npy``.

Volumes are split into train/test before slicing (never at the slice
level) by a seeded shuffle, and everything that happened is recorded in a
canonical-JSON manifest so reruns with the same inputs and seed are
byte-identical.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import resample
from .errors import (
    ConfigError,
    DegenerateVolumeError,
    IngestionError,
    MrisrError,
    ShapeError,
)
from .nifti import NiftiError, read_nifti

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "mrisr-manifest-v1"

PAD_TO = 256
SCALE = 4
BLANK_RULE = "all_zero"

GRADES = ("HGG", "LGG")
SPLITS = ("train", "test")


@dataclass
class VolumeRecord:
    """One ingested 3-D volume, raw or normalized, plus its provenance."""

    subject_id: str
    voxels: np.ndarray  # (H, W, n_slices)
    grade: str | None = None  # "HGG" / "LGG" / None when not inferable
    modality: str = "T1"
    split: str | None = None
    source: str = ""

    @property
    def n_slices(self) -> int:
        return self.voxels.shape[2]


@dataclass
class SlicePair:
    """An aligned HR (256x256) / LR (64x64) grayscale sample in [0, 1]."""

    volume_id: str
    slice_index: int
    hr: np.ndarray
    lr: np.ndarray

    def validate(self, scale: int = SCALE) -> None:
        if self.hr.ndim != 2 or self.lr.ndim != 2:
            raise ShapeError("hr and lr must be 2-D")
        if self.hr.shape != (self.lr.shape[0] * scale, self.lr.shape[1] * scale):
            raise ShapeError(
                f"hr shape {self.hr.shape} is not {scale}x lr shape {self.lr.shape}"
            )
        for name, arr in (("hr", self.hr), ("lr", self.lr)):
            if not np.all(np.isfinite(arr)):
                raise MrisrError(f"{name} of {self.key} contains non-finite values")
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise MrisrError(f"{name} of {self.key} leaves [0, 1]")
        if not self.hr.any():
            raise MrisrError(f"hr of {self.key} is blank")

    @property
    def key(self) -> str:
        return f"{self.volume_id}_{self.slice_index:03d}"


@dataclass
class DatasetManifest:
    """Persisted record of a dataset build: split, inclusions, exclusions."""

    seed: int
    split_fraction: float
    volumes: list[dict] = field(default_factory=list)
    included_slices: list[tuple[str, int]] = field(default_factory=list)
    excluded_slices: list[tuple[str, int, str]] = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    scale: int = SCALE
    pad_to: int = PAD_TO
    blank_rule: str = BLANK_RULE

    def split_of(self, volume_id: str) -> str:
        for vol in self.volumes:
            if vol["subject_id"] == volume_id:
                return vol["split"]
        raise KeyError(f"unknown volume_id {volume_id!r}")

    def slices_for_split(self, split: str) -> list[tuple[str, int]]:
        assignment = {v["subject_id"]: v["split"] for v in self.volumes}
        return [(vid, idx) for vid, idx in self.included_slices if assignment[vid] == split]

    def to_json(self) -> str:
        payload = {
            "format": MANIFEST_FORMAT,
            "seed": self.seed,
            "split_fraction": self.split_fraction,
            "scale": self.scale,
            "pad_to": self.pad_to,
            "blank_rule": self.blank_rule,
            "volumes": self.volumes,
            "included_slices": [list(t) for t in self.included_slices],
            "excluded_slices": [list(t) for t in self.excluded_slices],
            "counts": self.counts,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        payload = json.loads(text)
        if payload.get("format") != MANIFEST_FORMAT:
            raise MrisrError(f"not a recognized manifest (format={payload.get('format')!r})")
        return cls(
            seed=payload["seed"],
            split_fraction=payload["split_fraction"],
            volumes=payload["volumes"],
            included_slices=[tuple(t) for t in payload["included_slices"]],
            excluded_slices=[tuple(t) for t in payload["excluded_slices"]],
            counts=payload["counts"],
            scale=payload["scale"],
            pad_to=payload["pad_to"],
            blank_rule=payload["blank_rule"],
        )


def load_manifest(data_dir) -> DatasetManifest:
    path = Path(data_dir) / MANIFEST_NAME
    if not path.exists():
        raise MrisrError(f"no {MANIFEST_NAME} in {data_dir}")
    return DatasetManifest.from_json(path.read_text())


def pair_paths(data_dir, volume_id: str, slice_index: int) -> tuple[Path, Path]:
    stem = f"{volume_id}_{slice_index:03d}"
    base = Path(data_dir)
    return base / f"{stem}_hr.npy", base / f"{stem}_lr.npy"


def load_pair(data_dir, volume_id: str, slice_index: int) -> SlicePair:
    hr_path, lr_path = pair_paths(data_dir, volume_id, slice_index)
    try:
        hr = np.load(hr_path)
        lr = np.load(lr_path)
    except OSError as exc:
        raise MrisrError(f"missing slice pair files for {volume_id}_{slice_index:03d}: {exc}") from exc
    return SlicePair(volume_id=volume_id, slice_index=slice_index, hr=hr, lr=lr)


# ---------------------------------------------------------------------------
# per-slice / per-volume operations
# ---------------------------------------------------------------------------


def subject_id_from_path(path) -> str:
    name = Path(path).name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(path).stem


def infer_grade(path) -> str | None:
    """Grade from directory naming: a path component equal to HGG or LGG."""
    for part in Path(path).parts:
        if part.upper() in GRADES:
            return part.upper()
    return None


def ingest_volume(path, grade: str | None = None) -> VolumeRecord:
    """Read a NIfTI volume; raw intensities, no normalization."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"volume file does not exist: {path}")
    try:
        voxels = read_nifti(path)
    except NiftiError as exc:
        raise IngestionError(str(exc)) from exc
    if voxels.ndim != 3:
        raise ShapeError(f"{path}: expected a 3-D volume, got shape {voxels.shape}")
    h, w = voxels.shape[:2]
    if h > PAD_TO or w > PAD_TO:
        raise ShapeError(f"{path}: slice size {h}x{w} exceeds the {PAD_TO}x{PAD_TO} pad target")
    if grade is not None and grade not in GRADES:
        raise MrisrError(f"grade must be one of {GRADES}, got {grade!r}")
    return VolumeRecord(
        subject_id=subject_id_from_path(path),
        voxels=voxels,
        grade=grade or infer_grade(path),
        source=str(path),
    )


def is_blank(slice2d: np.ndarray) -> bool:
    """Blank slice rule: every raw voxel is exactly zero."""
    return not np.asarray(slice2d).any()


def normalize_volume(record: VolumeRecord) -> VolumeRecord:
    """Min-max scale the whole volume to [0, 1] (order-preserving)."""
    lo = float(record.voxels.min())
    hi = float(record.voxels.max())
    if hi == lo:
        raise DegenerateVolumeError(
            f"volume {record.subject_id} is constant ({lo}); nothing to normalize"
        )
    scaled = (record.voxels - lo) / (hi - lo)
    return VolumeRecord(
        subject_id=record.subject_id,
        voxels=scaled,
        grade=record.grade,
        modality=record.modality,
        split=record.split,
        source=record.source,
    )


def pad_slice(slice2d: np.ndarray, pad_to: int = PAD_TO) -> np.ndarray:
    """Center a slice in a ``pad_to`` square with a zero border."""
    s = np.asarray(slice2d)
    if s.ndim != 2:
        raise ShapeError(f"expected a 2-D slice, got shape {s.shape}")
    h, w = s.shape
    if h > pad_to or w > pad_to:
        raise ShapeError(f"slice {h}x{w} exceeds pad target {pad_to}x{pad_to}")
    if (h, w) == (pad_to, pad_to):
        return s
    top = (pad_to - h) // 2
    left = (pad_to - w) // 2
    out = np.zeros((pad_to, pad_to), dtype=s.dtype)
    out[top : top + h, left : left + w] = s
    return out


def degrade(hr: np.ndarray) -> np.ndarray:
    """HR -> LR: antialiased x4 bilinear downsampling, clipped to [0, 1]."""
    out = resample.downscale4_bilinear(hr)
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# dataset build
# ---------------------------------------------------------------------------


def _process_volume(path, split: str, grade_override, pad_to: int, out_dir: Path) -> dict:
    record = ingest_volume(path, grade=grade_override)
    record.split = split
    raw = record.voxels

    blank = [is_blank(raw[:, :, k]) for k in range(record.n_slices)]
    included: list[int] = []
    excluded: list[tuple[int, str]] = [(k, "blank") for k, b in enumerate(blank) if b]

    keep = [k for k, b in enumerate(blank) if not b]
    if keep:
        try:
            normalized = normalize_volume(record)
        except DegenerateVolumeError:
            log.warning("volume %s is constant; excluding all %d non-blank slices",
                        record.subject_id, len(keep))
            excluded += [(k, "constant_volume") for k in keep]
            keep = []
        else:
            for k in keep:
                hr = pad_slice(normalized.voxels[:, :, k], pad_to)
                if not hr.any():
                    # constant-at-minimum slice: normalizes to zero, carries no signal
                    excluded.append((k, "blank"))
                    continue
                pair = SlicePair(record.subject_id, k, hr, degrade(hr))
                pair.validate()
                hr_path, lr_path = pair_paths(out_dir, record.subject_id, k)
                np.save(hr_path, pair.hr.astype(np.float32))
                np.save(lr_path, pair.lr.astype(np.float32))
                included.append(k)

    return {
        "summary": {
            "subject_id": record.subject_id,
            "grade": record.grade,
            "modality": record.modality,
            "split": split,
            "n_slices": record.n_slices,
            "source": record.source,
        },
        "included": included,
        "excluded": sorted(excluded),
    }


def assign_splits(subject_ids: list[str], seed: int, split_fraction: float) -> dict[str, str]:
    """Volume-level split: seeded shuffle of the sorted ids, first block trains."""
    ids = sorted(subject_ids)
    order = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(round(len(ids) * split_fraction))
    n_train = min(max(n_train, 0), len(ids))
    shuffled = [ids[i] for i in order]
    return {sid: ("train" if pos < n_train else "test") for pos, sid in enumerate(shuffled)}


def build_dataset(
    volume_paths,
    out_dir,
    *,
    seed: int,
    split_fraction: float = 0.8,
    scale: int = SCALE,
    pad_to: int = PAD_TO,
    blank_rule: str = BLANK_RULE,
    grade_override: str | None = None,
    workers: int = 1,
) -> DatasetManifest:
    """Build the paired slice dataset and persist it plus its manifest."""
    paths = [Path(p) for p in volume_paths]
    if not paths:
        raise MrisrError("no volumes to process")
    if scale != SCALE:
        raise ConfigError(f"scale is fixed at {SCALE}")
    if pad_to != PAD_TO:
        raise ConfigError(f"pad_to is fixed at {PAD_TO}")
    if blank_rule != BLANK_RULE:
        raise ConfigError(f"unsupported blank_rule {blank_rule!r}")
    if not 0.0 < split_fraction < 1.0:
        raise ConfigError(f"split_fraction must be in (0, 1), got {split_fraction}")

    ids = [subject_id_from_path(p) for p in paths]
    dupes = {sid for sid in ids if ids.count(sid) > 1}
    if dupes:
        raise MrisrError(f"duplicate subject ids: {sorted(dupes)}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    split_map = assign_splits(ids, seed, split_fraction)

    def run(path):
        return _process_volume(
            path, split_map[subject_id_from_path(path)], grade_override, pad_to, out_dir
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, paths))
    else:
        results = [run(p) for p in paths]

    results.sort(key=lambda r: r["summary"]["subject_id"])
    manifest = DatasetManifest(seed=seed, split_fraction=split_fraction)
    for res in results:
        manifest.volumes.append(res["summary"])
        sid = res["summary"]["subject_id"]
        manifest.included_slices += [(sid, k) for k in res["included"]]
        manifest.excluded_slices += [(sid, k, reason) for k, reason in res["excluded"]]
    manifest.included_slices.sort()
    manifest.excluded_slices.sort()
    manifest.counts = {
        "volumes": len(manifest.volumes),
        "train_volumes": sum(1 for v in manifest.volumes if v["split"] == "train"),
        "test_volumes": sum(1 for v in manifest.volumes if v["split"] == "test"),
        "included": len(manifest.included_slices),
        "excluded": len(manifest.excluded_slices),
        "train_slices": len(manifest.slices_for_split("train")),
        "test_slices": len(manifest.slices_for_split("test")),
    }
    (out_dir / MANIFEST_NAME).write_text(manifest.to_json())
    log.info(
        "dataset built: %d volumes (%d train / %d test), %d slices included, %d excluded",
        manifest.counts["volumes"], manifest.counts["train_volumes"],
        manifest.counts["test_volumes"], manifest.counts["included"],
        manifest.counts["excluded"],
    )
    return manifest
