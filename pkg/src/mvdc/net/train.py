"""Alternating adversarial training: one step on D, then one step on G."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import TrainingDiverged
from ..geometry import RIG_SUBSETS
from .adam import Adam
from .config import TrainConfig
from .encoding import depth_to_net
from .losses import discriminator_loss, generator_adversarial_loss, pixel_loss, total_objective
from .model import CompletionGenerator, PatchDiscriminator, ShapeMemory, init_weights


@dataclass
class TrainExample:
    x: torch.Tensor  # (1, H, W) partial view
    y: torch.Tensor  # (1, H, W) ground-truth view
    shape_id: str
    view_id: int


@dataclass
class TrainState:
    config: TrainConfig
    generator: CompletionGenerator
    discriminator: PatchDiscriminator
    opt_g: Adam
    opt_d: Adam
    memory: ShapeMemory
    step: int = 0

    def checkpoint_tensors(self) -> dict[str, torch.Tensor]:
        tensors: dict[str, torch.Tensor] = {"step": torch.tensor(self.step, dtype=torch.int64)}
        for name, value in self.generator.state_dict().items():
            tensors[f"g.{name}"] = value
        for name, value in self.discriminator.state_dict().items():
            tensors[f"d.{name}"] = value
        tensors.update(self.opt_g.state_tensors("opt_g"))
        tensors.update(self.opt_d.state_tensors("opt_d"))
        return tensors


def build_train_state(config: TrainConfig) -> TrainState:
    """Construct networks and optimizers; deterministic for a given seed."""
    config.validate()
    torch.manual_seed(config.seed)
    generator = CompletionGenerator(config)
    discriminator = PatchDiscriminator(
        base_channels=config.disc_channels, layers=config.disc_layers
    )
    init_weights(generator)
    init_weights(discriminator)
    opt_g = Adam(
        list(generator.named_parameters()), lr=config.lr_g, betas=(config.beta1, config.beta2)
    )
    opt_d = Adam(
        list(discriminator.named_parameters()), lr=config.lr_d, betas=(config.beta1, config.beta2)
    )
    memory = ShapeMemory(RIG_SUBSETS[config.views])
    return TrainState(
        config=config,
        generator=generator,
        discriminator=discriminator,
        opt_g=opt_g,
        opt_d=opt_d,
        memory=memory,
    )


def _check_finite(name: str, value: torch.Tensor, step: int) -> None:
    if not torch.isfinite(value).all():
        raise TrainingDiverged(f"{name} is not finite at step {step}: {value.item()!r}")


def train_step(state: TrainState, batch: list[TrainExample]) -> dict[str, float]:
    """One alternating update. Returns the loss terms as floats."""
    if not batch:
        raise ValueError("empty batch")
    cfg = state.config
    g, d = state.generator, state.discriminator
    g.train()
    d.train()
    x = torch.stack([e.x for e in batch])
    y = torch.stack([e.y for e in batch])
    shape_ids = [e.shape_id for e in batch]
    view_ids = [e.view_id for e in batch]

    fake = g(x, state.memory, shape_ids, view_ids)

    loss_d_value = 0.0
    if cfg.use_cgan:
        real_scores = d(x, y)
        fake_scores = d(x, fake.detach())
        loss_d = discriminator_loss(real_scores, fake_scores)
        _check_finite("loss_D", loss_d, state.step)
        state.opt_d.zero_grad()
        loss_d.backward()
        state.opt_d.step()
        loss_d_value = float(loss_d.item())
        adv = generator_adversarial_loss(d(x, fake))
    else:
        adv = torch.zeros((), dtype=fake.dtype)

    pix = pixel_loss(fake, y, mode=cfg.pixel_loss)
    loss_g = total_objective(adv, pix, cfg.lam)
    _check_finite("loss_G", loss_g, state.step)
    state.opt_g.zero_grad()
    loss_g.backward()
    state.opt_g.step()
    # The G pass leaves gradients on D; they are cleared by opt_d.zero_grad()
    # before the next D update.

    state.step += 1
    return {
        "loss_d": loss_d_value,
        "loss_g_adv": float(adv.item()),
        "loss_l1": float(pix.item()),
    }


def run_training(
    state: TrainState,
    examples: list[TrainExample],
    steps: int | None = None,
    log=None,
) -> None:
    """Train for `steps` updates, shuffling examples each epoch.

    `log` is an optional callable receiving (step, metrics) after each update.
    """
    if not examples:
        raise ValueError("no training examples")
    cfg = state.config
    total = cfg.steps if steps is None else steps
    rng = np.random.default_rng(cfg.seed + 1)
    batch_size = min(cfg.batch_size, len(examples))
    while state.step < total:
        if cfg.memory_reset == "epoch":
            state.memory.reset()
        order = rng.permutation(len(examples))
        for start in range(0, len(order) - batch_size + 1, batch_size):
            batch = [examples[i] for i in order[start : start + batch_size]]
            metrics = train_step(state, batch)
            if log is not None:
                log(state.step, metrics)
            if state.step >= total:
                return


def examples_from_sample(sample, near: float, far: float) -> list[TrainExample]:
    """Per-view training pairs from a dataset sample."""
    out = []
    for pmap, tmap in zip(sample.partial_maps, sample.truth_maps):
        if pmap.view_index != tmap.view_index:
            raise ValueError("partial/truth view indices misaligned")
        out.append(
            TrainExample(
                x=depth_to_net(pmap, near, far),
                y=depth_to_net(tmap, near, far),
                shape_id=sample.shape_id,
                view_id=pmap.view_index,
            )
        )
    return out
