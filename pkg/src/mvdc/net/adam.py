"""Adam with bias correction, kept explicit so its state can be checkpointed
in a stable named format."""

from __future__ import annotations

import torch

from ..errors import TrainingDiverged


class Adam:
    def __init__(
        self,
        named_params: list[tuple[str, torch.nn.Parameter]],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.names = [name for name, _ in named_params]
        self.params = [p for _, p in named_params]
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [torch.zeros_like(p) for p in self.params]
        self.v = [torch.zeros_like(p) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            if p.grad is not None:
                p.grad.detach_()
                p.grad.zero_()

    @torch.no_grad()
    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p, m, v in zip(self.names, self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            if not torch.isfinite(g).all():
                raise TrainingDiverged(
                    f"non-finite gradient in {name} at step {self.t} "
                    f"(min={g.min().item()}, max={g.max().item()})"
                )
            m.mul_(self.beta1).add_(g, alpha=1.0 - self.beta1)
            v.mul_(self.beta2).addcmul_(g, g, value=1.0 - self.beta2)
            denom = (v / bc2).sqrt_().add_(self.eps)
            p.addcdiv_(m / bc1, denom, value=-self.lr)

    def state_tensors(self, prefix: str) -> dict[str, torch.Tensor]:
        """Moment tensors and step counter under stable names."""
        out: dict[str, torch.Tensor] = {
            f"{prefix}.t": torch.tensor(self.t, dtype=torch.int64)
        }
        for name, m, v in zip(self.names, self.m, self.v):
            out[f"{prefix}.m.{name}"] = m
            out[f"{prefix}.v.{name}"] = v
        return out

    def load_state_tensors(self, prefix: str, tensors: dict[str, torch.Tensor]) -> None:
        self.t = int(tensors[f"{prefix}.t"].item())
        for i, name in enumerate(self.names):
            self.m[i] = tensors[f"{prefix}.m.{name}"].clone().to(self.params[i].dtype)
            self.v[i] = tensors[f"{prefix}.v.{name}"].clone().to(self.params[i].dtype)
