"""Single-channel x4 RRDB generator and spectrally-normalized U-Net discriminator.

Generator: first conv -> trunk of residual-in-residual dense blocks -> trunk
conv with a long skip from the first features -> two (nearest x2 upsample +
conv + leaky ReLU) stages -> HR conv -> output conv. Each dense block runs
five 3x3 convs on the running concatenation of its inputs, leaky ReLU on all
but the last, and adds the result back scaled by beta; the RRDB wraps three
dense blocks with another beta-scaled skip.

Discriminator: three stride-2 encoder convs (widths 64/128/256/512 at the
default base), a mirrored bilinear-upsample decoder with additive skip
connections, two refinement convs and a 1-channel per-pixel logit head.
Every conv except the first input conv and the final output conv is
spectrally normalized. Spectral normalization here divides the kernel
(unrolled to a (out, in*k*k) matrix) by its top singular value computed by
warm-started power iteration run to convergence, so the unit bound holds
at every step, not just asymptotically.

Construction is deterministic: ``build_generator``/``build_discriminator``
draw every initial weight from one seeded torch.Generator. Dense-block conv
weights get variance-scaled (Kaiming) init shrunk by 0.1 to keep the deep
residual trunk stable at the start of training; all other convs get plain
Kaiming init; biases start at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError, NumericsError, ShapeError


@dataclass
class GeneratorConfig:
    in_channels: int = 1
    out_channels: int = 1
    base_channels: int = 64
    growth_channels: int = 32
    num_rrdb: int = 23
    dense_blocks_per_rrdb: int = 3
    convs_per_dense_block: int = 5
    residual_scale_beta: float = 0.2
    scale: int = 4
    upsample_mode: str = "nearest"

    def validate(self) -> None:
        if min(self.in_channels, self.out_channels, self.base_channels,
               self.growth_channels, self.num_rrdb, self.dense_blocks_per_rrdb) < 1:
            raise ConfigError(f"generator channel/block counts must be >= 1: {self}")
        if self.convs_per_dense_block < 2:
            raise ConfigError("a dense block needs at least 2 convs")
        if not 0.0 <= self.residual_scale_beta <= 1.0:
            raise ConfigError(
                f"residual_scale_beta must be in [0, 1], got {self.residual_scale_beta}"
            )
        if self.scale != 4:
            raise ConfigError(f"only x4 is supported, got scale={self.scale}")
        if self.upsample_mode != "nearest":
            raise ConfigError(f"unsupported upsample_mode {self.upsample_mode!r}")


@dataclass
class DiscriminatorConfig:
    in_channels: int = 1
    base_channels: int = 64
    num_down_stages: int = 3
    num_up_stages: int = 3
    spectral_norm: bool = True
    leaky_slope: float = 0.2

    def validate(self) -> None:
        if self.in_channels < 1 or self.base_channels < 1:
            raise ConfigError(f"discriminator channels must be >= 1: {self}")
        if self.num_down_stages < 1:
            raise ConfigError("need at least one downsampling stage")
        if self.num_up_stages != self.num_down_stages:
            raise ConfigError("decoder must mirror the encoder (num_up_stages == num_down_stages)")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ConfigError(f"leaky_slope must be in (0, 1), got {self.leaky_slope}")


def _init_conv(conv: nn.Conv2d, generator: torch.Generator, scale: float = 1.0) -> None:
    fan_in = conv.in_channels * conv.kernel_size[0] * conv.kernel_size[1]
    std = math.sqrt(2.0 / fan_in) * scale
    with torch.no_grad():
        conv.weight.normal_(0.0, std, generator=generator)
        if conv.bias is not None:
            conv.bias.zero_()


class SpectralNormConv2d(nn.Module):
    """Conv2d whose kernel is divided by its top singular value every call.

    The singular value is estimated on the (out_channels, in*k*k) unrolled
    kernel by power iteration warm-started from a persistent ``u`` buffer
    and iterated until the estimate stabilizes, so the normalized kernel's
    spectral norm is 1 up to the convergence tolerance. Gradients flow
    through both the kernel and the sigma estimate (u, v held fixed), as in
    standard spectral normalization.
    """

    MAX_ITERS = 200
    TOL = 1e-12

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size, stride, padding)
        self.register_buffer("u", torch.empty(out_channels))

    def reset_parameters(self, generator: torch.Generator) -> None:
        _init_conv(self.conv, generator)
        with torch.no_grad():
            self.u.normal_(0.0, 1.0, generator=generator)
        self._power_iterate()

    def _power_iterate(self) -> torch.Tensor:
        """Update u in place; return the frozen right vector v."""
        w = self.conv.weight.detach().reshape(self.conv.out_channels, -1)
        with torch.no_grad():
            u = F.normalize(self.u, dim=0, eps=1e-12)
            sigma_prev = 0.0
            for _ in range(self.MAX_ITERS):
                v = F.normalize(w.t() @ u, dim=0, eps=1e-12)
                u = F.normalize(w @ v, dim=0, eps=1e-12)
                sigma = float(u @ w @ v)
                if abs(sigma - sigma_prev) <= self.TOL * max(abs(sigma), 1.0):
                    break
                sigma_prev = sigma
            self.u.copy_(u)
        return v

    def normalized_weight(self) -> torch.Tensor:
        v = self._power_iterate()
        # clone so the sigma graph survives the next in-place update of u
        u = self.u.clone()
        w_mat = self.conv.weight.reshape(self.conv.out_channels, -1)
        sigma = torch.dot(u, w_mat @ v)
        return self.conv.weight / sigma

    def forward(self, x):
        return F.conv2d(
            x,
            self.normalized_weight(),
            self.conv.bias,
            stride=self.conv.stride,
            padding=self.conv.padding,
        )


class DenseBlock(nn.Module):
    """Densely connected conv stack with a beta-scaled residual connection."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        nf, gc, k = cfg.base_channels, cfg.growth_channels, cfg.convs_per_dense_block
        self.beta = cfg.residual_scale_beta
        self.slope = 0.2
        convs = []
        for i in range(k - 1):
            convs.append(nn.Conv2d(nf + i * gc, gc, 3, 1, 1))
        convs.append(nn.Conv2d(nf + (k - 1) * gc, nf, 3, 1, 1))
        self.convs = nn.ModuleList(convs)

    def reset_parameters(self, generator: torch.Generator) -> None:
        for conv in self.convs:
            _init_conv(conv, generator, scale=0.1)

    def forward(self, x):
        feats = [x]
        for conv in self.convs[:-1]:
            feats.append(F.leaky_relu(conv(torch.cat(feats, dim=1)), self.slope))
        out = self.convs[-1](torch.cat(feats, dim=1))
        return x + self.beta * out


class RRDB(nn.Module):
    """Residual-in-residual wrapper around a chain of dense blocks."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.blocks = nn.ModuleList(DenseBlock(cfg) for _ in range(cfg.dense_blocks_per_rrdb))
        self.beta = cfg.residual_scale_beta

    def reset_parameters(self, generator: torch.Generator) -> None:
        for block in self.blocks:
            block.reset_parameters(generator)

    def forward(self, x):
        out = x
        for block in self.blocks:
            out = block(out)
        return x + self.beta * out


class RRDBGenerator(nn.Module):
    """x4 super-resolution generator."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        config.validate()
        self.config = config
        nf = config.base_channels
        self.conv_first = nn.Conv2d(config.in_channels, nf, 3, 1, 1)
        self.body = nn.ModuleList(RRDB(config) for _ in range(config.num_rrdb))
        self.conv_body = nn.Conv2d(nf, nf, 3, 1, 1)
        self.conv_up1 = nn.Conv2d(nf, nf, 3, 1, 1)
        self.conv_up2 = nn.Conv2d(nf, nf, 3, 1, 1)
        self.conv_hr = nn.Conv2d(nf, nf, 3, 1, 1)
        self.conv_last = nn.Conv2d(nf, config.out_channels, 3, 1, 1)
        self.slope = 0.2

    def reset_parameters(self, generator: torch.Generator) -> None:
        _init_conv(self.conv_first, generator)
        for rrdb in self.body:
            rrdb.reset_parameters(generator)
        for conv in (self.conv_body, self.conv_up1, self.conv_up2, self.conv_hr, self.conv_last):
            _init_conv(conv, generator)

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise ShapeError(
                f"expected (B, {self.config.in_channels}, H, W) input, got {tuple(x.shape)}"
            )
        if x.shape[2] < 16 or x.shape[3] < 16:
            raise ShapeError(f"input spatial size {tuple(x.shape[2:])} below the 16x16 minimum")
        if not torch.isfinite(x).all():
            raise NumericsError("generator input contains non-finite values")
        feat = self.conv_first(x)
        trunk = feat
        for rrdb in self.body:
            trunk = rrdb(trunk)
        feat = feat + self.conv_body(trunk)
        mode = self.config.upsample_mode
        feat = F.leaky_relu(self.conv_up1(F.interpolate(feat, scale_factor=2, mode=mode)), self.slope)
        feat = F.leaky_relu(self.conv_up2(F.interpolate(feat, scale_factor=2, mode=mode)), self.slope)
        return self.conv_last(F.leaky_relu(self.conv_hr(feat), self.slope))


class UNetDiscriminator(nn.Module):
    """Fully-convolutional U-Net discriminator emitting per-pixel logits."""

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        config.validate()
        self.config = config
        base = config.base_channels
        stages = config.num_down_stages
        widths = [base * 2**k for k in range(stages + 1)]

        def sn_conv(cin, cout, k, s, p):
            if config.spectral_norm:
                return SpectralNormConv2d(cin, cout, k, s, p)
            return nn.Conv2d(cin, cout, k, s, p)

        self.conv_in = nn.Conv2d(config.in_channels, base, 3, 1, 1)
        self.down = nn.ModuleList(sn_conv(widths[k], widths[k + 1], 4, 2, 1) for k in range(stages))
        self.up = nn.ModuleList(sn_conv(widths[k + 1], widths[k], 3, 1, 1) for k in reversed(range(stages)))
        self.conv_tail1 = sn_conv(base, base, 3, 1, 1)
        self.conv_tail2 = sn_conv(base, base, 3, 1, 1)
        self.conv_out = nn.Conv2d(base, 1, 3, 1, 1)

    def reset_parameters(self, generator: torch.Generator) -> None:
        _init_conv(self.conv_in, generator)
        for conv in list(self.down) + list(self.up) + [self.conv_tail1, self.conv_tail2]:
            if isinstance(conv, SpectralNormConv2d):
                conv.reset_parameters(generator)
            else:
                _init_conv(conv, generator)
        _init_conv(self.conv_out, generator)

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def spectral_convs(self):
        return [m for m in self.modules() if isinstance(m, SpectralNormConv2d)]

    def forward(self, x):
        stages = self.config.num_down_stages
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise ShapeError(
                f"expected (B, {self.config.in_channels}, H, W) input, got {tuple(x.shape)}"
            )
        if x.shape[2] % 2**stages or x.shape[3] % 2**stages:
            raise ShapeError(
                f"spatial size {tuple(x.shape[2:])} not divisible by 2^{stages}"
            )
        slope = self.config.leaky_slope
        feats = [F.leaky_relu(self.conv_in(x), slope)]
        for conv in self.down:
            feats.append(F.leaky_relu(conv(feats[-1]), slope))
        y = feats[-1]
        for i, conv in enumerate(self.up):
            y = F.interpolate(y, scale_factor=2, mode="bilinear", align_corners=False)
            y = F.leaky_relu(conv(y), slope)
            y = y + feats[stages - 1 - i]
        y = F.leaky_relu(self.conv_tail1(y), slope)
        y = F.leaky_relu(self.conv_tail2(y), slope)
        return self.conv_out(y)


def build_generator(config: GeneratorConfig, seed: int = 0) -> RRDBGenerator:
    """Construct the generator with deterministic seeded initialization."""
    model = RRDBGenerator(config)
    model.reset_parameters(torch.Generator().manual_seed(seed))
    return model


def build_discriminator(config: DiscriminatorConfig, seed: int = 0) -> UNetDiscriminator:
    """Construct the discriminator with deterministic seeded initialization."""
    model = UNetDiscriminator(config)
    model.reset_parameters(torch.Generator().manual_seed(seed))
    return model


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def named_parameter_arrays(module: nn.Module) -> dict:
    """Named parameters as detached numpy arrays (checkpoint-shaped view)."""
    return {name: p.detach().cpu().numpy().copy() for name, p in module.named_parameters()}
