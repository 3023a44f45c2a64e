"""Two-pass inference: fill the shape memory from every view, then complete
each view against the full descriptor."""

from __future__ import annotations

import torch

from ..geometry import CameraRig, DepthMap
from .encoding import depth_to_net, net_to_depth
from .model import ShapeMemory
from .train import TrainState


def complete_shape(
    state: TrainState,
    maps: list[DepthMap],
    rig: CameraRig,
    passes: int = 2,
) -> list[DepthMap]:
    """Complete all V partial views of one shape.

    Pass 1 populates every memory slot (inference mode: dropout off, running
    batch-norm statistics); pass 2 recomputes each view with the pooled
    descriptor. Output order matches input order.
    """
    cfg = state.config
    if len(maps) != cfg.views:
        raise ValueError(f"expected {cfg.views} views, got {len(maps)}")
    if tuple(m.view_index for m in maps) != rig.view_ids:
        raise ValueError("maps misaligned with rig views")
    if passes < 1:
        raise ValueError("need at least one pass")
    g = state.generator
    g.eval()
    memory = ShapeMemory(rig.view_ids)
    shape_ids = ["_inference"] * len(maps)
    view_ids = list(rig.view_ids)
    x = torch.stack([depth_to_net(m, rig.near, rig.far) for m in maps])
    with torch.no_grad():
        out = g(x, memory, shape_ids, view_ids)
        for _ in range(passes - 1):
            out = g(x, memory, shape_ids, view_ids)
    return [
        net_to_depth(out[i], rig.near, rig.far, view_index=rig.view_ids[i])
        for i in range(len(maps))
    ]
