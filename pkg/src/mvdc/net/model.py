"""Completion network: U-Net generator with cross-view shape memory, and a
patch discriminator.

The generator's down path extracts a per-view feature map; a per-shape memory
stores the latest feature of every view, and their elementwise maximum (the
shape descriptor) is concatenated back into the down path so each view's
completion sees the whole shape. The "vcn" model variant duplicates the view
feature instead, which removes all cross-view flow while keeping the exact
same parameter shapes.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import TrainConfig


def view_pool(features: list[torch.Tensor], mode: str = "max") -> torch.Tensor:
    """Aggregate view features into a shape descriptor.

    Max pooling takes the maximum activation in each dimension; the mean
    variant exists for ablation.
    """
    if len(features) == 0:
        raise ValueError("no occupied memory slots to pool")
    stack = torch.stack(list(features))
    if mode == "max":
        return stack.max(dim=0).values
    if mode == "mean":
        return stack.mean(dim=0)
    raise ValueError(f"unknown pooling mode {mode!r}")


class ShapeMemory:
    """Per-shape table of the most recent feature map of each view.

    Only occupied slots participate in pooling; empty slots are excluded
    rather than zero-filled because normalized features can be negative.
    """

    def __init__(self, view_ids: tuple[int, ...]):
        self.view_ids = tuple(view_ids)
        self._slots: dict[str, dict[int, torch.Tensor]] = {}

    def update(self, shape_id: str, view_index: int, feature: torch.Tensor) -> None:
        if view_index not in self.view_ids:
            raise ValueError(f"view index {view_index} not in rig views {self.view_ids}")
        self._slots.setdefault(shape_id, {})[view_index] = feature.detach()

    def occupied(self, shape_id: str) -> tuple[int, ...]:
        return tuple(sorted(self._slots.get(shape_id, {})))

    def features(self, shape_id: str) -> list[torch.Tensor]:
        slots = self._slots.get(shape_id, {})
        return [slots[v] for v in sorted(slots)]

    def pooled(
        self,
        shape_id: str,
        mode: str = "max",
        live_view: int | None = None,
        live_feature: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Descriptor over the shape's occupied slots, optionally with one
        slot replaced by a live (still differentiable) feature."""
        slots = dict(self._slots.get(shape_id, {}))
        if live_view is not None:
            if live_view not in self.view_ids:
                raise ValueError(f"view index {live_view} not in rig views {self.view_ids}")
            slots[live_view] = live_feature
        return view_pool([slots[v] for v in sorted(slots)], mode=mode)

    def reset(self) -> None:
        self._slots.clear()


class DownBlock(nn.Module):
    """Convolution-BatchNorm-LeakyReLU step that halves resolution."""

    def __init__(self, in_ch: int, out_ch: int, outermost: bool = False, norm: bool = True):
        super().__init__()
        layers: list[nn.Module] = []
        if not outermost:
            layers.append(nn.LeakyReLU(0.2))
        layers.append(nn.Conv2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1, bias=not norm))
        if norm and not outermost:
            layers.append(nn.BatchNorm2d(out_ch))
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        return self.block(x)


class UpBlock(nn.Module):
    """UpReLU-UpConv-UpNorm step that doubles resolution."""

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        outermost: bool = False,
        dropout: float = 0.0,
    ):
        super().__init__()
        layers: list[nn.Module] = [nn.ReLU()]
        if outermost:
            layers.append(nn.ConvTranspose2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1))
            layers.append(nn.Tanh())
        else:
            layers.append(
                nn.ConvTranspose2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1, bias=False)
            )
            layers.append(nn.BatchNorm2d(out_ch))
            if dropout > 0.0:
                layers.append(nn.Dropout(dropout))
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        return self.block(x)


class CompletionGenerator(nn.Module):
    """U-Net translating one partial depth view into a completed view."""

    def __init__(self, config: TrainConfig):
        super().__init__()
        config.validate()
        self.config = config
        levels = config.levels
        ch = list(config.channels)

        # Index of the down block whose output is the view feature; the
        # descriptor is concatenated onto it before the next block. None
        # means pooling happens on the bottleneck code instead.
        if config.pool_position == "code":
            self.pool_after: int | None = None
        else:
            self.pool_after = levels - 2 - int(config.pool_position[1])

        downs = []
        in_ch = 1
        for k in range(levels):
            if k > 0 and k - 1 == self.pool_after:
                in_ch *= 2
            downs.append(
                DownBlock(
                    in_ch,
                    ch[k],
                    outermost=(k == 0),
                    norm=(0 < k < levels - 1),
                )
            )
            in_ch = ch[k]
        self.downs = nn.ModuleList(downs)

        if self.pool_after is None:
            self.code_fc = nn.Conv2d(2 * ch[-1], ch[-1], kernel_size=1)

        skip_ch = [2 * ch[k] if k == self.pool_after else ch[k] for k in range(levels - 1)]
        ups = []
        t_ch = ch[-1]
        n_dropout = min(3, levels - 1)
        for j, k in enumerate(range(levels - 2, -1, -1)):
            ups.append(
                UpBlock(t_ch, ch[k], dropout=config.dropout if j < n_dropout else 0.0)
            )
            t_ch = ch[k] + skip_ch[k]
        ups.append(UpBlock(t_ch, 1, outermost=True))
        self.ups = nn.ModuleList(ups)

    def forward(
        self,
        x: torch.Tensor,
        memory: ShapeMemory | None = None,
        shape_ids: list[str] | None = None,
        view_ids: list[int] | None = None,
    ) -> torch.Tensor:
        levels = self.config.levels
        t = x
        skips: list[torch.Tensor] = []
        for k, block in enumerate(self.downs):
            t = block(t)
            if k == self.pool_after:
                f = t
                d = self._descriptors(f, memory, shape_ids, view_ids)
                t = torch.cat([f, d], dim=1)
                skips.append(t)
            elif k < levels - 1:
                skips.append(t)
        if self.pool_after is None:
            f = t
            d = self._descriptors(f, memory, shape_ids, view_ids)
            t = self.code_fc(torch.cat([f, d], dim=1))
        for j, k in enumerate(range(levels - 2, -1, -1)):
            t = self.ups[j](t)
            t = torch.cat([t, skips[k]], dim=1)
        return self.ups[-1](t)

    def _descriptors(
        self,
        f: torch.Tensor,
        memory: ShapeMemory | None,
        shape_ids: list[str] | None,
        view_ids: list[int] | None,
    ) -> torch.Tensor:
        if self.config.model == "vcn" or memory is None:
            return f
        if shape_ids is None or view_ids is None:
            raise ValueError("shape_ids and view_ids are required when using shape memory")
        if len(shape_ids) != f.shape[0] or len(view_ids) != f.shape[0]:
            raise ValueError("shape_ids/view_ids length must match the batch")
        # Each element pools against the pre-batch memory plus its own live
        # feature, so results do not depend on batch order; the detached
        # features are stored afterwards.
        descriptors = [
            memory.pooled(
                shape_ids[b],
                mode=self.config.pooling,
                live_view=view_ids[b],
                live_feature=f[b],
            )
            for b in range(f.shape[0])
        ]
        for b in range(f.shape[0]):
            memory.update(shape_ids[b], view_ids[b], f[b])
        return torch.stack(descriptors)


class PatchDiscriminator(nn.Module):
    """Conv stack classifying overlapping patches of (input, target) pairs.

    Produces a grid of sigmoid scores; the receptive field grows with the
    layer count (3 layers cover roughly 22 px).
    """

    def __init__(self, base_channels: int = 32, layers: int = 3):
        super().__init__()
        seq: list[nn.Module] = [
            nn.Conv2d(2, base_channels, kernel_size=4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
        ]
        width = base_channels
        for _ in range(layers - 2):
            seq.append(nn.Conv2d(width, width * 2, kernel_size=4, stride=2, padding=1, bias=False))
            seq.append(nn.BatchNorm2d(width * 2))
            seq.append(nn.LeakyReLU(0.2))
            width *= 2
        seq.append(nn.Conv2d(width, 1, kernel_size=4, stride=1, padding=1))
        seq.append(nn.Sigmoid())
        self.net = nn.Sequential(*seq)

    def forward(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([x, y], dim=1))


def init_weights(module: nn.Module) -> None:
    """Gaussian(0, 0.02) conv init; BatchNorm scales around 1."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, 0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.normal_(m.weight, 1.0, 0.02)
            nn.init.zeros_(m.bias)
