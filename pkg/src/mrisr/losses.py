"""Training objectives: pixel L1, multi-tap feature-space L1, relativistic GAN.

The perceptual term compares pre-activation feature maps from a frozen
VGG19-style backbone at the last conv of each conv group, with per-tap
weights (0.1, 0.1, 1, 1, 1) for the full backbone. Grayscale inputs are
replicated to three channels and normalized with the backbone's training
statistics. A small "tiny" preset with the same layout rules exists so the
loss path can be exercised without the 550 MB pretrained weight file.

The adversarial terms use the relativistic-average form on per-pixel logit
maps: each class is scored against the mean logit of the opposite class
over the whole batch and all positions, and both binary cross-entropy terms
are summed (not halved), so equal real/fake logits give exactly 2*ln 2.
All BCE terms are evaluated in softplus form directly on logits, which is
exact and stable for |logit| well past 20.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from .errors import CheckpointError, ConfigError, NumericsError, ShapeError

VGG19_WEIGHTS_ENV = "MRISR_VGG19_WEIGHTS"

# convs_per_group/widths describe a VGG-style stack: each group is
# (conv + ReLU) * n followed by a 2x2 max pool between groups. tap_convs are
# 1-based conv ordinals counted across the whole stack; taps are taken
# before the ReLU.
ARCH_PRESETS = {
    "vgg19": {
        "convs_per_group": (2, 2, 4, 4, 4),
        "widths": (64, 128, 256, 512, 512),
        "tap_convs": (2, 4, 8, 12, 16),
        "layer_weights": (0.1, 0.1, 1.0, 1.0, 1.0),
    },
    "tiny": {
        "convs_per_group": (1, 1),
        "widths": (4, 8),
        "tap_convs": (1, 2),
        "layer_weights": (1.0, 1.0),
    },
}

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


def _file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class FeatureExtractor(nn.Module):
    """Frozen VGG-style feature extractor with pre-activation taps.

    ``arch`` picks a preset ("vgg19", "tiny") or "custom", in which case
    ``convs_per_group``, ``widths``, ``tap_convs`` and ``layer_weights``
    must all be given. The stack is truncated right after the deepest tap
    conv, so the module indices (and therefore state-dict keys) match a
    full torchvision-layout ``features`` stack.

    If ``weights_path`` is None for the "vgg19" preset, the path is taken
    from the MRISR_VGG19_WEIGHTS environment variable; a missing file is a
    configuration error. Other archs fall back to a fixed-seed random
    initialization so runs stay deterministic without a weight file.
    """

    def __init__(
        self,
        arch: str = "vgg19",
        weights_path: str | None = None,
        *,
        convs_per_group: tuple[int, ...] | None = None,
        widths: tuple[int, ...] | None = None,
        tap_convs: tuple[int, ...] | None = None,
        layer_weights: tuple[float, ...] | None = None,
        normalize_input: bool = True,
    ):
        super().__init__()
        if arch in ARCH_PRESETS:
            preset = ARCH_PRESETS[arch]
            convs_per_group = convs_per_group or preset["convs_per_group"]
            widths = widths or preset["widths"]
            tap_convs = tap_convs or preset["tap_convs"]
            layer_weights = layer_weights or preset["layer_weights"]
        elif arch != "custom":
            raise ConfigError(f"unknown extractor arch {arch!r}")
        if None in (convs_per_group, widths, tap_convs, layer_weights):
            raise ConfigError("custom arch requires convs_per_group, widths, tap_convs, layer_weights")
        if len(convs_per_group) != len(widths):
            raise ConfigError("convs_per_group and widths must have equal length")
        if len(tap_convs) != len(layer_weights):
            raise ConfigError("tap_convs and layer_weights must have equal length")
        n_convs = sum(convs_per_group)
        if sorted(tap_convs) != list(tap_convs) or len(set(tap_convs)) != len(tap_convs):
            raise ConfigError(f"tap_convs must be strictly increasing, got {tap_convs}")
        if tap_convs[0] < 1 or tap_convs[-1] > n_convs:
            raise ConfigError(f"tap_convs out of range 1..{n_convs}: {tap_convs}")
        if any(w < 0 for w in layer_weights):
            raise ConfigError(f"layer_weights must be nonnegative, got {layer_weights}")

        self.arch = arch
        self.tap_convs = tuple(tap_convs)
        self.layer_weights = tuple(float(w) for w in layer_weights)
        self.normalize_input = normalize_input

        layers: list[nn.Module] = []
        self._tap_indices: list[int] = []
        conv_ordinal = 0
        pools_before_deepest = 0
        in_ch = 3
        done = False
        for group, (n, width) in enumerate(zip(convs_per_group, widths)):
            if group > 0:
                layers.append(nn.MaxPool2d(2, 2))
            for _ in range(n):
                conv_ordinal += 1
                layers.append(nn.Conv2d(in_ch, width, 3, 1, 1))
                in_ch = width
                if conv_ordinal in self.tap_convs:
                    self._tap_indices.append(len(layers) - 1)
                if conv_ordinal == self.tap_convs[-1]:
                    pools_before_deepest = group
                    done = True
                    break
                layers.append(nn.ReLU(inplace=False))
            if done:
                break
        self.features = nn.Sequential(*layers)
        self.min_input_size = 2 ** (pools_before_deepest + 1)
        self.register_buffer("input_mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("input_std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))

        if weights_path is None and arch == "vgg19":
            weights_path = os.environ.get(VGG19_WEIGHTS_ENV) or None
            if weights_path is None:
                raise ConfigError(
                    "vgg19 extractor needs a local weight file: pass weights_path "
                    f"or set {VGG19_WEIGHTS_ENV}"
                )
        if weights_path is not None:
            self.weights_sha256 = self._load_weights(weights_path)
            self.weights_path = weights_path
        else:
            gen = torch.Generator().manual_seed(0)
            with torch.no_grad():
                for m in self.features:
                    if isinstance(m, nn.Conv2d):
                        fan_in = m.in_channels * 9
                        m.weight.normal_(0.0, math.sqrt(2.0 / fan_in), generator=gen)
                        m.bias.zero_()
            self.weights_sha256 = None
            self.weights_path = None

        self.requires_grad_(False)
        self.eval()

    def _load_weights(self, path: str) -> str:
        if not os.path.isfile(path):
            raise ConfigError(f"extractor weight file not found: {path}")
        state = torch.load(path, map_location="cpu", weights_only=True)
        wanted = self.features.state_dict()
        picked = {}
        for key in wanted:
            full = f"features.{key}"
            if full in state:
                picked[key] = state[full]
            elif key in state:
                picked[key] = state[key]
            else:
                raise CheckpointError(f"weight file {path} is missing key {full}")
        self.features.load_state_dict(picked)
        return _file_sha256(path)

    def train(self, mode: bool = True):
        # the backbone is frozen; ignore requests to enter training mode
        return super().train(False)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        if x.ndim != 4 or x.shape[1] not in (1, 3):
            raise ShapeError(f"expected (B, 1|3, H, W) input, got {tuple(x.shape)}")
        if min(x.shape[2], x.shape[3]) < self.min_input_size:
            raise ShapeError(
                f"input {tuple(x.shape[2:])} below minimum {self.min_input_size} "
                f"for the deepest tap"
            )
        if x.shape[1] == 1:
            x = x.repeat(1, 3, 1, 1)
        if self.normalize_input:
            x = (x - self.input_mean) / self.input_std
        taps = []
        tap_set = set(self._tap_indices)
        for idx, layer in enumerate(self.features):
            x = layer(x)
            if idx in tap_set:
                taps.append(x)
        return taps


@dataclass
class LossBundle:
    pixel: torch.Tensor
    perceptual: torch.Tensor
    adversarial_g: torch.Tensor
    adversarial_d: torch.Tensor
    total_g: torch.Tensor
    weights: dict = field(default_factory=lambda: {"pixel": 1.0, "perceptual": 1.0, "adversarial": 1.0})

    def detached(self) -> dict:
        """Plain-float view for logging."""
        return {
            "pixel": float(self.pixel.detach()),
            "perceptual": float(self.perceptual.detach()),
            "adversarial_g": float(self.adversarial_g.detach()),
            "adversarial_d": float(self.adversarial_d.detach()),
            "total_g": float(self.total_g.detach()),
        }


def pixel_loss(sr: torch.Tensor, hr: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all elements."""
    if sr.shape != hr.shape:
        raise ShapeError(f"shape mismatch: {tuple(sr.shape)} vs {tuple(hr.shape)}")
    return (sr - hr).abs().mean()


def perceptual_loss(extractor: FeatureExtractor, sr: torch.Tensor, hr: torch.Tensor) -> torch.Tensor:
    """Weighted sum of L1 distances between tap features of sr and hr."""
    if sr.shape != hr.shape:
        raise ShapeError(f"shape mismatch: {tuple(sr.shape)} vs {tuple(hr.shape)}")
    sr_taps = extractor(sr)
    with torch.no_grad():
        hr_taps = extractor(hr)
    total = sr.new_zeros(())
    for weight, a, b in zip(extractor.layer_weights, sr_taps, hr_taps):
        total = total + weight * (a - b).abs().mean()
    return total


def adversarial_losses(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> dict:
    """Relativistic-average GAN losses for per-pixel logit maps.

    d = BCE(sigmoid(real - mean(fake)), 1) + BCE(sigmoid(fake - mean(real)), 0)
    g = BCE(sigmoid(fake - mean(real)), 1) + BCE(sigmoid(real - mean(fake)), 0)

    with each BCE averaged over all positions and the opposite-class mean
    taken over batch and pixels together. Computed via softplus on logits.
    """
    if real_logits.shape != fake_logits.shape:
        raise ShapeError(
            f"logit shape mismatch: {tuple(real_logits.shape)} vs {tuple(fake_logits.shape)}"
        )
    if not bool(torch.isfinite(real_logits).all()) or not bool(torch.isfinite(fake_logits).all()):
        raise NumericsError("non-finite discriminator logits")
    real_rel = real_logits - fake_logits.mean()
    fake_rel = fake_logits - real_logits.mean()
    adv_d = F.softplus(-real_rel).mean() + F.softplus(fake_rel).mean()
    adv_g = F.softplus(-fake_rel).mean() + F.softplus(real_rel).mean()
    return {"adversarial_g": adv_g, "adversarial_d": adv_d}


def combine(pixel, perceptual, adversarial_g, adversarial_d=None, weights=None) -> LossBundle:
    """Assemble a LossBundle; total_g is the weighted (default unit) sum."""
    def _as_tensor(v):
        return v if isinstance(v, torch.Tensor) else torch.tensor(float(v), dtype=torch.float64)

    pixel = _as_tensor(pixel)
    perceptual = _as_tensor(perceptual)
    adversarial_g = _as_tensor(adversarial_g)
    adversarial_d = _as_tensor(0.0 if adversarial_d is None else adversarial_d)
    w = {"pixel": 1.0, "perceptual": 1.0, "adversarial": 1.0}
    if weights:
        unknown = set(weights) - set(w)
        if unknown:
            raise ConfigError(f"unknown loss weight keys: {sorted(unknown)}")
        w.update({k: float(v) for k, v in weights.items()})
    for name, term in (("pixel", pixel), ("perceptual", perceptual),
                       ("adversarial_g", adversarial_g), ("adversarial_d", adversarial_d)):
        if not bool(torch.isfinite(term).all()):
            raise NumericsError(f"non-finite loss term {name}")
    total = w["pixel"] * pixel + w["perceptual"] * perceptual + w["adversarial"] * adversarial_g
    return LossBundle(pixel, perceptual, adversarial_g, adversarial_d, total, w)
