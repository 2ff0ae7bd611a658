"""Alternating generator/discriminator training with Adam, plus inference.

One iteration is: a generator step on pixel + perceptual + adversarial
losses (discriminator parameters frozen, real logits taken without grad),
then a discriminator step on the relativistic loss with the fake image
detached from the generator graph. Every iteration appends one row to the
run's loss log; checkpoints capture both networks, both optimizers, the
sampler state and the configs, so resuming reproduces the uninterrupted
run bit-for-bit on the same platform.

Run directory layout:
    config.json          effective config snapshot
    loss_log.csv         iteration,pixel,perceptual,adv_g,adv_d,total_g
    checkpoints/iter_<n>.pt
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data_pipeline import load_manifest, load_pair
from .errors import (
    CheckpointError,
    ConfigError,
    NumericsError,
    ShapeError,
    TrainingDivergedError,
)
from .losses import FeatureExtractor, adversarial_losses, combine, perceptual_loss, pixel_loss
from .models import (
    DiscriminatorConfig,
    GeneratorConfig,
    RRDBGenerator,
    UNetDiscriminator,
    build_discriminator,
    build_generator,
)

CHECKPOINT_FORMAT = "mrisr-checkpoint-v1"
LOSS_LOG_NAME = "loss_log.csv"
LOSS_LOG_HEADER = "iteration,pixel,perceptual,adv_g,adv_d,total_g"
CHECKPOINT_DIR = "checkpoints"


@dataclass
class TrainConfig:
    iterations: int = 300000
    learning_rate: float = 1e-4
    batch_size: int = 1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    seed: int = 0
    checkpoint_every: int = 10000
    log_every: int = 1
    pixel_weight: float = 1.0
    perceptual_weight: float = 1.0
    adversarial_weight: float = 1.0
    grad_clip: float = 0.0
    ema_decay: float = 0.0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("adam_beta1", "adam_beta2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {v}")
        if self.checkpoint_every < 1 or self.log_every < 1:
            raise ConfigError("checkpoint_every and log_every must be >= 1")
        for name in ("pixel_weight", "perceptual_weight", "adversarial_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.pixel_weight + self.perceptual_weight + self.adversarial_weight == 0:
            raise ConfigError("at least one generator loss weight must be positive")
        if self.grad_clip < 0 or not 0.0 <= self.ema_decay < 1.0:
            raise ConfigError("grad_clip must be >= 0 and ema_decay in [0, 1)")


@dataclass
class TrainState:
    iteration: int
    generator: RRDBGenerator
    discriminator: UNetDiscriminator
    optimizer_g: torch.optim.Adam
    optimizer_d: torch.optim.Adam
    sampler: np.random.Generator
    config: TrainConfig
    extractor: FeatureExtractor | None = None
    ema: dict | None = None
    loss_history: list = field(default_factory=list)


def _grad_norm(module: torch.nn.Module) -> float:
    total = 0.0
    for p in module.parameters():
        if p.grad is not None:
            total += float(p.grad.detach().pow(2).sum())
    return math.sqrt(total)


def init_state(
    train_cfg: TrainConfig,
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    extractor: FeatureExtractor | None = None,
) -> TrainState:
    train_cfg.validate()
    if train_cfg.perceptual_weight > 0 and extractor is None:
        raise ConfigError("perceptual_weight > 0 requires a feature extractor")
    generator = build_generator(gen_cfg, seed=train_cfg.seed)
    discriminator = build_discriminator(disc_cfg, seed=train_cfg.seed + 1)
    betas = (train_cfg.adam_beta1, train_cfg.adam_beta2)
    opt_g = torch.optim.Adam(generator.parameters(), lr=train_cfg.learning_rate, betas=betas)
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=train_cfg.learning_rate, betas=betas)
    sampler = np.random.default_rng(train_cfg.seed)
    ema = None
    if train_cfg.ema_decay > 0:
        ema = {k: v.detach().clone() for k, v in generator.state_dict().items()}
    return TrainState(
        iteration=0,
        generator=generator,
        discriminator=discriminator,
        optimizer_g=opt_g,
        optimizer_d=opt_d,
        sampler=sampler,
        config=train_cfg,
        extractor=extractor,
        ema=ema,
    )


def train_step(state: TrainState, batch: tuple[torch.Tensor, torch.Tensor]) -> TrainState:
    """Run one generator update then one discriminator update in place."""
    lr_imgs, hr_imgs = batch
    cfg = state.config
    gen, disc = state.generator, state.discriminator
    zero = torch.zeros(())

    for p in disc.parameters():
        p.requires_grad_(False)
    sr = gen(lr_imgs)
    pixel = pixel_loss(sr, hr_imgs) if cfg.pixel_weight > 0 else zero
    perceptual = (
        perceptual_loss(state.extractor, sr, hr_imgs) if cfg.perceptual_weight > 0 else zero
    )
    if cfg.adversarial_weight > 0:
        try:
            with torch.no_grad():
                real_logits_frozen = disc(hr_imgs)
            adv_g = adversarial_losses(real_logits_frozen, disc(sr))["adversarial_g"]
        except NumericsError as exc:
            raise TrainingDivergedError(
                str(exc), snapshot={"iteration": state.iteration + 1, "stage": "generator"}
            ) from exc
    else:
        adv_g = zero
    try:
        bundle = combine(
            pixel,
            perceptual,
            adv_g,
            weights={
                "pixel": cfg.pixel_weight,
                "perceptual": cfg.perceptual_weight,
                "adversarial": cfg.adversarial_weight,
            },
        )
    except NumericsError as exc:
        raise TrainingDivergedError(
            str(exc), snapshot={"iteration": state.iteration + 1, "stage": "generator"}
        ) from exc
    state.optimizer_g.zero_grad(set_to_none=True)
    bundle.total_g.backward()
    if cfg.grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(gen.parameters(), cfg.grad_clip)
    grad_norm_g = _grad_norm(gen)
    for p in disc.parameters():
        p.requires_grad_(True)

    adv_d_value = 0.0
    grad_norm_d = 0.0
    if cfg.adversarial_weight > 0:
        try:
            real_logits = disc(hr_imgs)
            fake_logits = disc(sr.detach())
            adv_d = adversarial_losses(real_logits, fake_logits)["adversarial_d"]
        except NumericsError as exc:
            raise TrainingDivergedError(
                str(exc), snapshot={"iteration": state.iteration + 1, "stage": "discriminator"}
            ) from exc
        state.optimizer_d.zero_grad(set_to_none=True)
        adv_d.backward()
        if cfg.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(disc.parameters(), cfg.grad_clip)
        grad_norm_d = _grad_norm(disc)
        adv_d_value = float(adv_d.detach())

    record = {
        "iteration": state.iteration + 1,
        "pixel": float(bundle.pixel.detach()),
        "perceptual": float(bundle.perceptual.detach()),
        "adv_g": float(bundle.adversarial_g.detach()),
        "adv_d": adv_d_value,
        "total_g": float(bundle.total_g.detach()),
    }
    bad = [k for k, v in record.items() if k != "iteration" and not math.isfinite(v)]
    if bad or not math.isfinite(grad_norm_g) or not math.isfinite(grad_norm_d):
        raise TrainingDivergedError(
            f"non-finite loss terms at iteration {record['iteration']}: {bad or 'gradients'}",
            snapshot={**record, "grad_norm_g": grad_norm_g, "grad_norm_d": grad_norm_d},
        )

    state.optimizer_g.step()
    if cfg.adversarial_weight > 0:
        state.optimizer_d.step()
    if state.ema is not None:
        decay = cfg.ema_decay
        with torch.no_grad():
            for key, value in gen.state_dict().items():
                shadow = state.ema[key]
                if value.dtype.is_floating_point:
                    shadow.mul_(decay).add_(value, alpha=1.0 - decay)
                else:
                    shadow.copy_(value)

    state.iteration += 1
    state.loss_history.append(record)
    return state


def make_batch(pairs) -> tuple[torch.Tensor, torch.Tensor]:
    """Stack SlicePairs into float32 (B,1,H,W) LR/HR tensors."""
    lr = torch.from_numpy(np.stack([p.lr for p in pairs])[:, None, :, :].astype(np.float32))
    hr = torch.from_numpy(np.stack([p.hr for p in pairs])[:, None, :, :].astype(np.float32))
    return lr, hr


def _format_row(record: dict) -> str:
    return ",".join(
        [str(record["iteration"])]
        + [repr(float(record[k])) for k in ("pixel", "perceptual", "adv_g", "adv_d", "total_g")]
    )


def save_checkpoint(path, state: TrainState, gen_cfg: GeneratorConfig, disc_cfg: DiscriminatorConfig) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "iteration": state.iteration,
        "generator": state.generator.state_dict(),
        "discriminator": state.discriminator.state_dict(),
        "optimizer_g": state.optimizer_g.state_dict(),
        "optimizer_d": state.optimizer_d.state_dict(),
        "sampler_state": state.sampler.bit_generator.state,
        "generator_config": asdict(gen_cfg),
        "discriminator_config": asdict(disc_cfg),
        "train_config": asdict(state.config),
        "generator_ema": state.ema,
        "extractor_info": {
            "arch": state.extractor.arch,
            "weights_sha256": state.extractor.weights_sha256,
        }
        if state.extractor is not None
        else None,
    }
    torch.save(payload, path)


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
    return payload


def _require_matching_config(stored: dict, current: dict, label: str) -> None:
    for key in sorted(set(stored) | set(current)):
        if stored.get(key) != current.get(key):
            raise CheckpointError(
                f"{label}.{key} mismatch: checkpoint has {stored.get(key)!r}, "
                f"run config has {current.get(key)!r}"
            )


def restore_state(
    payload: dict,
    train_cfg: TrainConfig,
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    extractor: FeatureExtractor | None = None,
) -> TrainState:
    """Rebuild a TrainState from a checkpoint payload, validating configs."""
    _require_matching_config(payload["generator_config"], asdict(gen_cfg), "generator_config")
    _require_matching_config(payload["discriminator_config"], asdict(disc_cfg), "discriminator_config")
    stored_train = dict(payload["train_config"])
    current_train = asdict(train_cfg)
    # the iteration budget may be extended on resume; everything else must match
    stored_train.pop("iterations", None)
    current_train.pop("iterations", None)
    _require_matching_config(stored_train, current_train, "train_config")

    state = init_state(train_cfg, gen_cfg, disc_cfg, extractor=extractor)
    state.generator.load_state_dict(payload["generator"])
    state.discriminator.load_state_dict(payload["discriminator"])
    state.optimizer_g.load_state_dict(payload["optimizer_g"])
    state.optimizer_d.load_state_dict(payload["optimizer_d"])
    state.sampler.bit_generator.state = payload["sampler_state"]
    state.iteration = payload["iteration"]
    if payload.get("generator_ema") is not None:
        state.ema = payload["generator_ema"]
    return state


def _latest_checkpoint(run_dir: Path) -> Path | None:
    ckpt_dir = run_dir / CHECKPOINT_DIR
    if not ckpt_dir.is_dir():
        return None
    candidates = sorted(ckpt_dir.glob("iter_*.pt"))
    return candidates[-1] if candidates else None


def _truncate_loss_log(log_path: Path, up_to_iteration: int) -> None:
    if not log_path.exists():
        log_path.write_text(LOSS_LOG_HEADER + "\n")
        return
    lines = log_path.read_text().splitlines()
    kept = [LOSS_LOG_HEADER]
    for line in lines[1:]:
        if line and int(line.split(",", 1)[0]) <= up_to_iteration:
            kept.append(line)
    log_path.write_text("\n".join(kept) + "\n")


def train(
    train_cfg: TrainConfig,
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    data_dir,
    run_dir,
    *,
    extractor: FeatureExtractor | None = None,
    resume: bool = False,
) -> Path:
    """Train on the manifest's train split; return the final checkpoint path."""
    train_cfg.validate()
    gen_cfg.validate()
    disc_cfg.validate()
    data_dir = Path(data_dir)
    run_dir = Path(run_dir)
    manifest = load_manifest(data_dir)
    train_keys = manifest.slices_for_split("train")
    if not train_keys:
        raise ConfigError("manifest has no train slices")

    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / CHECKPOINT_DIR).mkdir(exist_ok=True)
    log_path = run_dir / LOSS_LOG_NAME

    if resume:
        latest = _latest_checkpoint(run_dir)
        if latest is None:
            raise CheckpointError(f"--resume requested but no checkpoints under {run_dir}")
        state = restore_state(load_checkpoint(latest), train_cfg, gen_cfg, disc_cfg, extractor)
        _truncate_loss_log(log_path, state.iteration)
    else:
        state = init_state(train_cfg, gen_cfg, disc_cfg, extractor=extractor)
        log_path.write_text(LOSS_LOG_HEADER + "\n")

    def checkpoint_path(iteration: int) -> Path:
        return run_dir / CHECKPOINT_DIR / f"iter_{iteration:06d}.pt"

    n = len(train_keys)
    with log_path.open("a") as log_fh:
        while state.iteration < train_cfg.iterations:
            picks = state.sampler.integers(0, n, size=train_cfg.batch_size)
            pairs = [load_pair(data_dir, *train_keys[int(i)]) for i in picks]
            state = train_step(state, make_batch(pairs))
            it = state.iteration
            if it % train_cfg.log_every == 0 or it == train_cfg.iterations:
                log_fh.write(_format_row(state.loss_history[-1]) + "\n")
                log_fh.flush()
            if it % train_cfg.checkpoint_every == 0 or it == train_cfg.iterations:
                save_checkpoint(checkpoint_path(it), state, gen_cfg, disc_cfg)

    final = checkpoint_path(train_cfg.iterations)
    if not final.exists():
        save_checkpoint(final, state, gen_cfg, disc_cfg)
    return final


def load_generator(checkpoint, *, use_ema: bool | None = None) -> RRDBGenerator:
    """Build an eval-mode generator from a checkpoint path or payload."""
    payload = checkpoint if isinstance(checkpoint, dict) else load_checkpoint(checkpoint)
    gen_cfg = GeneratorConfig(**payload["generator_config"])
    generator = RRDBGenerator(gen_cfg)
    weights = payload["generator"]
    if use_ema is None:
        use_ema = payload.get("generator_ema") is not None
    if use_ema:
        if payload.get("generator_ema") is None:
            raise CheckpointError("checkpoint has no EMA weights")
        weights = payload["generator_ema"]
    generator.load_state_dict(weights)
    generator.eval()
    return generator


def apply_generator(generator: RRDBGenerator, lr_image: np.ndarray) -> np.ndarray:
    """Run one LR image (H,W) or (1,H,W) through an eval-mode generator."""
    arr = np.asarray(lr_image, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3 or arr.shape[0] != 1:
        raise ShapeError(f"expected (1,H,W) or (H,W) LR image, got {arr.shape}")
    if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
        raise NumericsError("LR image values must be finite and in [0,1]")
    with torch.no_grad():
        sr = generator(torch.from_numpy(arr)[None, ...])
    return sr.clamp_(0.0, 1.0).squeeze(0).numpy().astype(np.float32)


def infer(checkpoint, lr_image: np.ndarray, *, use_ema: bool | None = None) -> np.ndarray:
    """Upscale one LR image (H,W) or (1,H,W) to (1,4H,4W) in [0,1]."""
    return apply_generator(load_generator(checkpoint, use_ema=use_ema), lr_image)
