"""Grayscale MR-slice x4 super-resolution: data prep, GAN training, metrics."""

__version__ = "0.1.0"

from .data_pipeline import DatasetManifest, SlicePair, build_dataset, load_manifest, load_pair
from .errors import (
    CheckpointError,
    ConfigError,
    DegenerateReferenceError,
    DegenerateVolumeError,
    IngestionError,
    MrisrError,
    NumericsError,
    ShapeError,
    TrainingDivergedError,
)
from .evaluator import MetricsReport, baseline_upscale, evaluate_split, make_montage, write_reports
from .losses import FeatureExtractor, LossBundle, adversarial_losses, combine, perceptual_loss, pixel_loss
from .metrics import mae, nrmse, ssim, vif
from .models import (
    DiscriminatorConfig,
    GeneratorConfig,
    RRDBGenerator,
    SpectralNormConv2d,
    UNetDiscriminator,
    build_discriminator,
    build_generator,
    parameter_count,
)
from .trainer import TrainConfig, infer, train, train_step

__all__ = [
    "DatasetManifest",
    "SlicePair",
    "build_dataset",
    "load_manifest",
    "load_pair",
    "MrisrError",
    "ShapeError",
    "IngestionError",
    "ConfigError",
    "CheckpointError",
    "NumericsError",
    "DegenerateVolumeError",
    "DegenerateReferenceError",
    "TrainingDivergedError",
    "MetricsReport",
    "baseline_upscale",
    "evaluate_split",
    "make_montage",
    "write_reports",
    "FeatureExtractor",
    "LossBundle",
    "adversarial_losses",
    "combine",
    "perceptual_loss",
    "pixel_loss",
    "mae",
    "nrmse",
    "ssim",
    "vif",
    "GeneratorConfig",
    "DiscriminatorConfig",
    "RRDBGenerator",
    "UNetDiscriminator",
    "SpectralNormConv2d",
    "build_generator",
    "build_discriminator",
    "parameter_count",
    "TrainConfig",
    "train",
    "train_step",
    "infer",
    "__version__",
]
