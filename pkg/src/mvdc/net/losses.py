"""Adversarial and pixel losses."""

from __future__ import annotations

import torch

SCORE_EPS = 1e-7


def _clamp(scores: torch.Tensor) -> torch.Tensor:
    return scores.clamp(SCORE_EPS, 1.0 - SCORE_EPS)


def discriminator_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """-E[log D(x, y)] - E[log(1 - D(x, G(x)))]."""
    return -torch.log(_clamp(real_scores)).mean() - torch.log1p(-_clamp(fake_scores)).mean()


def generator_adversarial_loss(fake_scores: torch.Tensor) -> torch.Tensor:
    """Non-saturating form: -E[log D(x, G(x))]."""
    return -torch.log(_clamp(fake_scores)).mean()


def loss_cgan(
    real_scores: torch.Tensor, fake_scores: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Both sides of the adversarial objective: (loss_D, loss_G_adv)."""
    return discriminator_loss(real_scores, fake_scores), generator_adversarial_loss(fake_scores)


def pixel_loss(pred: torch.Tensor, target: torch.Tensor, mode: str = "l1") -> torch.Tensor:
    """Mean absolute (or squared, for ablation) difference over all elements."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    diff = pred - target
    if mode == "l1":
        return diff.abs().mean()
    if mode == "l2":
        return diff.square().mean()
    raise ValueError(f"unknown pixel loss mode {mode!r}")


def total_objective(adv: torch.Tensor, pix: torch.Tensor, lam: float) -> torch.Tensor:
    """Generator objective: adversarial term plus lam-weighted pixel term."""
    return adv + lam * pix
