"""Shared fixtures: tiny model configs, synthetic datasets, short training runs."""

from __future__ import annotations

import numpy as np
import pytest

from mrisr import kernels
from mrisr.data_pipeline import build_dataset
from mrisr.losses import FeatureExtractor
from mrisr.models import DiscriminatorConfig, GeneratorConfig
from mrisr.nifti import write_nifti
from mrisr.trainer import TrainConfig, train

from tests.synthetic import make_volume


@pytest.fixture(autouse=True)
def _restore_backend():
    before = kernels.get_backend()
    yield
    kernels.set_backend(before)


@pytest.fixture
def tiny_gen_cfg() -> GeneratorConfig:
    return GeneratorConfig(num_rrdb=1, base_channels=8, growth_channels=4)


@pytest.fixture
def tiny_disc_cfg() -> DiscriminatorConfig:
    return DiscriminatorConfig(base_channels=8)


@pytest.fixture(scope="session")
def tiny_extractor() -> FeatureExtractor:
    return FeatureExtractor(arch="tiny")


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    """Synthetic 3-volume dataset with known blank planes, fully prepared.

    Volumes: volA 6 slices (2 blank), volB 5 slices (1 blank), volC 4 slices
    (0 blank) -> 15 raw slices, 12 included, 3 excluded. seed=3 puts one
    volume in the test split (round(3 * 0.8) = 2 train).
    """
    rng = np.random.default_rng(123)
    root = tmp_path_factory.mktemp("dataset")
    raw = root / "raw"
    (raw / "HGG").mkdir(parents=True)
    (raw / "LGG").mkdir(parents=True)
    write_nifti(raw / "HGG" / "volA_t1.nii.gz", make_volume(rng, 6, {0, 5}))
    write_nifti(raw / "HGG" / "volB_t1.nii.gz", make_volume(rng, 5, {2}))
    write_nifti(raw / "LGG" / "volC_t1.nii.gz", make_volume(rng, 4))
    data = root / "data"
    manifest = build_dataset(sorted(raw.rglob("*.nii.gz")), data, seed=3, split_fraction=0.8)
    return {"raw": raw, "data": data, "manifest": manifest}


@pytest.fixture(scope="session")
def short_run(tmp_path_factory, dataset_dir):
    """A 5-iteration L1-only training run on the tiny generator."""
    run_dir = tmp_path_factory.mktemp("short_run")
    cfg = TrainConfig(
        iterations=5,
        seed=7,
        checkpoint_every=5,
        perceptual_weight=0.0,
        adversarial_weight=0.0,
    )
    gen_cfg = GeneratorConfig(num_rrdb=1, base_channels=8, growth_channels=4)
    disc_cfg = DiscriminatorConfig(base_channels=8)
    final = train(cfg, gen_cfg, disc_cfg, dataset_dir["data"], run_dir)
    return {"run_dir": run_dir, "checkpoint": final, "train_cfg": cfg,
            "gen_cfg": gen_cfg, "disc_cfg": disc_cfg}
